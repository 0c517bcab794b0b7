// psim: trace-driven simulation and packing studies for elastic shared
// model-aggregation scheduling.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "psim/assignment.hpp"
#include "psim/engine.hpp"
#include "psim/io.hpp"
#include "psim/log.hpp"
#include "psim/metrics.hpp"
#include "psim/oracle.hpp"
#include "psim/synth.hpp"

namespace fs = std::filesystem;
using namespace psim;

namespace {

struct SimulateArgs {
    std::string trace_path;
    std::string profiles_path;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double interval_s = 0;
    bool interval_set = false;
    int sweep = 1;
};

int run_one_simulation(const std::vector<io::TraceRecord>& trace,
                       const std::map<std::string, JobProfile>& models, io::RunConfig cfg,
                       const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream log_file(out_dir / "events.log");
    if (!log_file) {
        std::cerr << "psim: cannot write " << (out_dir / "events.log") << "\n";
        return 1;
    }
    sim::SimOptions opts;
    opts.config = cfg;
    opts.log_detail = log_level() == LogLevel::debug ? sim::RecordLevel::debug
                                                     : sim::RecordLevel::info;
    sim::StreamSink sink(log_file, opts.log_detail);
    sim::SimResult result = sim::run_simulation(trace, models, opts, &sink);

    std::ofstream csv(out_dir / "intervals.csv");
    sim::write_interval_csv(csv, result.metrics);
    std::ofstream summary(out_dir / "summary.txt");
    sim::write_summary(summary, result.metrics);

    std::cout << "simulated " << result.end_time_ms / 1000 << "s, " << result.events_processed
              << " events; outputs in " << out_dir.string() << "\n";
    std::cout << "cpu_time_saving " << result.metrics.cpu_time_saving << "\n";
    return 0;
}

int cmd_simulate(const SimulateArgs& args) {
    auto models = io::load_profiles(args.profiles_path);
    auto trace = io::load_trace(args.trace_path);
    io::validate_trace(trace, models, args.trace_path);
    io::RunConfig cfg =
        args.config_path.empty() ? io::RunConfig{} : io::load_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (args.interval_set) cfg.interval_ms = static_cast<TimeMs>(args.interval_s * 1000.0);
    cfg.validate();

    if (args.sweep <= 1) {
        return run_one_simulation(trace, models, cfg, args.out_dir);
    }
    // Independent instances in parallel, one output directory per seed.
    std::vector<std::thread> workers;
    std::vector<int> codes(static_cast<std::size_t>(args.sweep), 0);
    for (int i = 0; i < args.sweep; ++i) {
        workers.emplace_back([&, i]() {
            io::RunConfig c = cfg;
            c.seed = cfg.seed + static_cast<std::uint64_t>(i);
            codes[static_cast<std::size_t>(i)] = run_one_simulation(
                trace, models, c, fs::path(args.out_dir) / ("sweep-" + std::to_string(i)));
        });
    }
    for (auto& w : workers) w.join();
    for (int c : codes) {
        if (c != 0) return c;
    }
    return 0;
}

int cmd_pack(const std::string& profiles_path, std::vector<std::string> job_ids,
             const std::string& config_path) {
    auto models = io::load_profiles(profiles_path);
    io::RunConfig run_cfg =
        config_path.empty() ? io::RunConfig{} : io::load_config(config_path);
    AssignConfig cfg;
    cfg.loss_limit = run_cfg.loss_limit;
    cfg.monitor_iterations = run_cfg.monitor_iterations;

    if (job_ids.empty()) {
        for (const auto& [id, m] : models) job_ids.push_back(id);
    }
    // Each listed id is one job instance; the same model may appear several
    // times, so instances get positional names.
    SchedulerState state;
    std::map<JobId, JobProfile> profiles;
    std::vector<JobProfile> jobs;
    int required_total = 0;
    for (std::size_t i = 0; i < job_ids.size(); ++i) {
        auto it = models.find(job_ids[i]);
        if (it == models.end()) {
            std::cerr << "psim: unknown profile id " << job_ids[i] << "\n";
            return 2;
        }
        JobProfile instance = it->second;
        instance.job_id = job_ids[i] + "-" + std::to_string(i);
        for (auto& t : instance.tasks) t.job_id = instance.job_id;
        profiles.emplace(instance.job_id, instance);
        jobs.push_back(instance);
        required_total += instance.required_servers;
    }
    for (const auto& j : jobs) {
        if (!assign_job(state, profiles.at(j.job_id), profiles, cfg)) {
            std::cerr << "psim: could not place job " << j.job_id << "\n";
            return 1;
        }
    }

    auto metrics = oracle::assignment_metrics(state.assignment, jobs);
    for (const auto& [agg_id, agg] : state.aggs) {
        std::cout << "aggregator " << agg_id << " cycle_ms=" << agg.cycle_ms
                  << " free_ms=" << free_slots(agg, profiles) << "\n";
        for (const auto& slot : agg.slot_schedule) {
            std::cout << "  [" << slot.start_ms << "," << slot.start_ms + slot.duration_ms
                      << ") " << slot.job_id << "/" << slot.task_id << " rep " << slot.rep
                      << "\n";
        }
    }
    for (const auto& [job, loss] : metrics.losses) {
        std::cout << "job " << job << " est_duration_ms=" << metrics.durations.at(job).str()
                  << " est_loss=" << loss.str() << " (" << loss.to_double() << ")\n";
    }
    const int allocated = static_cast<int>(state.aggs.size());
    std::cout << "aggregators " << allocated << "\n";
    std::cout << "required_servers " << required_total << "\n";
    std::cout << "cpu_reduction_ratio "
              << static_cast<double>(required_total - allocated) /
                     static_cast<double>(required_total)
              << "\n";
    return 0;
}

int cmd_oracle_compare(int count, std::uint64_t seed, int max_jobs, int max_tasks) {
    synth::Rng rng(seed);
    AssignConfig cfg;
    int compared = 0;
    int skipped = 0;
    int violations = 0;
    int zero_gap = 0;
    double max_gap = 0;

    std::cout << "instance,jobs,tasks,aggs,heuristic_loss,oracle_loss,gap\n";
    for (int i = 0; i < count; ++i) {
        std::vector<JobProfile> jobs;
        const int njobs = static_cast<int>(rng.next_int(1, max_jobs));
        for (int j = 0; j < njobs; ++j) {
            JobProfile p;
            p.job_id = "j" + std::to_string(j);
            p.iter_duration_ms = 5 * rng.next_int(1, 8);
            p.required_servers = 2;
            p.num_workers = 2;
            const int ntasks = static_cast<int>(rng.next_int(1, max_tasks));
            TimeMs budget = 2 * p.iter_duration_ms;
            for (int t = 0; t < ntasks; ++t) {
                TimeMs e = rng.next_int(1, std::max<TimeMs>(1, p.iter_duration_ms / 2));
                if (e > budget) break;
                budget -= e;
                p.tasks.push_back(
                    {"t" + std::to_string(t), p.job_id, e, 1'000'000});
                p.tensor_ready_offsets_ms.push_back(0);
            }
            if (!p.tasks.empty()) jobs.push_back(std::move(p));
        }
        if (jobs.empty()) continue;

        std::map<JobId, JobProfile> profiles;
        std::size_t task_count = 0;
        for (const auto& j : jobs) {
            profiles.emplace(j.job_id, j);
            task_count += j.tasks.size();
        }
        SchedulerState state;
        bool placed = true;
        for (const auto& j : jobs) {
            if (!assign_job(state, j, profiles, cfg)) placed = false;
        }
        if (!placed) continue;

        std::vector<AggId> agg_ids;
        for (const auto& [id, agg] : state.aggs) agg_ids.push_back(id);
        auto report = oracle::validate_assignment(state.assignment, jobs, agg_ids);
        violations += static_cast<int>(report.violations.size());
        auto heuristic = oracle::assignment_metrics(state.assignment, jobs);

        oracle::ExactInstance inst;
        inst.jobs = jobs;
        inst.num_aggs = static_cast<int>(state.aggs.size());
        double combos = 1;
        bool in_guard = true;
        for (std::size_t t = 0; t < task_count; ++t) {
            combos *= inst.num_aggs;
            if (combos > 1e7) in_guard = false;
        }
        if (!in_guard) {
            ++skipped;
            continue;
        }
        auto sol = oracle::solve_exact(inst);
        const double gap = heuristic.max_loss.to_double() - sol.max_loss.to_double();
        if (sol.max_loss == heuristic.max_loss) ++zero_gap;
        max_gap = std::max(max_gap, gap);
        std::cout << i << "," << jobs.size() << "," << task_count << "," << inst.num_aggs << ","
                  << heuristic.max_loss.to_double() << "," << sol.max_loss.to_double() << ","
                  << gap << "\n";
        ++compared;
    }
    std::cout << "compared " << compared << "\n";
    std::cout << "skipped_guard " << skipped << "\n";
    std::cout << "constraint_violations " << violations << "\n";
    std::cout << "zero_gap " << zero_gap << "\n";
    std::cout << "max_gap " << max_gap << "\n";
    return violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    set_log_level(log_level_from_env());

    CLI::App app{"deterministic simulator for elastic shared model aggregation"};
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "run a trace-driven simulation");
    simulate->add_option("--trace", sim_args.trace_path, "job trace (JSON lines)")->required();
    simulate->add_option("--profiles", sim_args.profiles_path, "model profiles (JSON lines)")
        ->required();
    simulate->add_option("--config", sim_args.config_path, "run configuration (JSON)");
    simulate->add_option("--out", sim_args.out_dir, "output directory")->required();
    auto* seed_opt = simulate->add_option("--seed", sim_args.seed, "seed override");
    auto* interval_opt =
        simulate->add_option("--interval-s", sim_args.interval_s, "metrics interval override");
    simulate->add_option("--sweep", sim_args.sweep, "run N seeds in parallel");

    std::string pack_profiles, pack_config;
    std::vector<std::string> pack_jobs;
    auto* pack = app.add_subcommand("pack", "static packing report for a set of jobs");
    pack->add_option("--profiles", pack_profiles, "model profiles (JSON lines)")->required();
    pack->add_option("--jobs", pack_jobs, "profile ids to pack, in order")->delimiter(',');
    pack->add_option("--config", pack_config, "run configuration (JSON)");

    int oc_count = 1000;
    std::uint64_t oc_seed = 1;
    int oc_max_jobs = 3;
    int oc_max_tasks = 3;
    auto* oc = app.add_subcommand("oracle-compare",
                                  "compare the heuristic against exhaustive optimization");
    oc->add_option("--count", oc_count, "number of random instances");
    oc->add_option("--seed", oc_seed, "generator seed");
    oc->add_option("--max-jobs", oc_max_jobs, "jobs per instance");
    oc->add_option("--max-tasks", oc_max_tasks, "tasks per job");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            sim_args.seed_set = seed_opt->count() > 0;
            sim_args.interval_set = interval_opt->count() > 0;
            return cmd_simulate(sim_args);
        }
        if (pack->parsed()) {
            return cmd_pack(pack_profiles, pack_jobs, pack_config);
        }
        if (oc->parsed()) {
            return cmd_oracle_compare(oc_count, oc_seed, oc_max_jobs, oc_max_tasks);
        }
    } catch (const io::ParseError& e) {
        std::cerr << "psim: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "psim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
