#include <map>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "psim/engine.hpp"

using namespace psim;
using namespace psim::sim;
using psim::test::make_job;

namespace {

io::TraceRecord submit(const std::string& job, double at_s, double dur_s,
                       const std::string& model, int servers, int workers) {
    io::TraceRecord r;
    r.job_id = job;
    r.submit_time_ms = static_cast<TimeMs>(at_s * 1000);
    r.duration_ms = static_cast<TimeMs>(dur_s * 1000);
    r.required_servers = servers;
    r.num_workers = workers;
    r.model_profile_id = model;
    return r;
}

SimOptions fast_monitor_opts(int monitor = 10) {
    SimOptions opts;
    opts.config.monitor_iterations = monitor;
    opts.config.scaling_period_ms = 60'000;
    opts.record_completions = true;
    return opts;
}

std::vector<TimeMs> durations(const std::vector<TimeMs>& completions, TimeMs start) {
    std::vector<TimeMs> out;
    TimeMs prev = start;
    for (TimeMs c : completions) {
        out.push_back(c - prev);
        prev = c;
    }
    return out;
}

}  // namespace

TEST_CASE("late request rule: slack executes, exhaustion postpones") {
    // 40% of the cycle is free after the reserved slots; execute now.
    std::vector<Obstacle> reserved{{600, 900}};
    auto d = handle_late_request(reserved, 1000, 401, 150, 1500);
    CHECK(d.execute_now);
    CHECK(d.at_ms == 401);

    // Reservations leave no room before the cycle ends; next slot instead.
    std::vector<Obstacle> packed{{450, 990}};
    auto p = handle_late_request(packed, 1000, 430, 100, 1400);
    CHECK_FALSE(p.execute_now);
    CHECK(p.at_ms == 1400);

    // Gap only behind a reservation.
    std::vector<Obstacle> mid{{500, 800}};
    auto g = handle_late_request(mid, 1000, 480, 150, 1300);
    CHECK(g.execute_now);
    CHECK(g.at_ms == 800);
}

TEST_CASE("empty trace produces an empty deterministic report") {
    auto result = run_simulation({}, {}, SimOptions{});
    CHECK(result.metrics.jobs_arrived == 0);
    CHECK(result.metrics.cpu_time_allocated == 0);
    CHECK(result.metrics.peak_allocated == 0);
    CHECK(result.end_time_ms == 0);
}

TEST_CASE("a lone heavy job runs standalone at profiled speed on its server count") {
    // Four 300ms tasks cannot share one 1000ms cycle: two aggregators, the
    // same count the job would have requested.
    std::map<std::string, JobProfile> models;
    models.emplace("heavy", make_job("heavy", 1000, {300, 300, 300, 300}, {100, 400, 100, 400}));

    auto opts = fast_monitor_opts();
    auto result = run_simulation({submit("j1", 0.0, 30.0, "heavy", 2, 2)}, models, opts);

    CHECK(result.metrics.peak_allocated == 2);
    const auto& stats = result.jobs.at("j1");
    REQUIRE(stats.completions.size() >= 10);
    auto durs = durations(stats.completions, 0);
    for (TimeMs d : durs) CHECK(d == 1000);  // exactly the profiled duration
    CHECK(result.metrics.normalized_perf.at("j1") == 1.0);
}

TEST_CASE("two jobs sharing one aggregator run at their effective durations") {
    std::map<std::string, JobProfile> models;
    models.emplace("half", make_job("half", 600, {200}, {100}, 1, 2));
    models.emplace("full", make_job("full", 1200, {300}, {200}, 1, 2));

    auto opts = fast_monitor_opts();
    auto result = run_simulation(
        {submit("a", 0.0, 24.0, "half", 1, 2), submit("b", 0.0, 24.0, "full", 1, 2)}, models,
        opts);

    CHECK(result.metrics.peak_allocated == 1);  // packed together
    auto durs_a = durations(result.jobs.at("a").completions, 0);
    auto durs_b = durations(result.jobs.at("b").completions, 0);
    REQUIRE(durs_a.size() >= 20);
    REQUIRE(durs_b.size() >= 10);
    for (TimeMs d : durs_a) CHECK(d == 600);   // effective_iteration(600, 1200)
    for (TimeMs d : durs_b) CHECK(d == 1200);  // owns the cycle
}

TEST_CASE("every tensor is aggregated exactly once per iteration") {
    std::map<std::string, JobProfile> models;
    models.emplace("half", make_job("half", 600, {200}, {100}, 1, 2));
    models.emplace("full", make_job("full", 1200, {300}, {200}, 1, 2));

    auto opts = fast_monitor_opts();
    opts.log_detail = RecordLevel::debug;
    VectorSink sink(RecordLevel::debug);
    auto result = run_simulation(
        {submit("a", 0.0, 12.0, "half", 1, 2), submit("b", 0.0, 12.0, "full", 1, 2)}, models,
        opts, &sink);

    std::map<std::string, std::int64_t> execs;
    for (const auto& r : sink.records()) {
        if (r.kind == "AggSlotEnd") ++execs[*r.field("job")];
    }
    CHECK(execs.at("a") == result.jobs.at("a").iterations);
    CHECK(execs.at("b") == result.jobs.at("b").iterations);
}

TEST_CASE("straggler within slack changes nothing at all") {
    std::map<std::string, JobProfile> models;
    models.emplace("light", make_job("light", 600, {50}, {100}, 1, 2));

    auto base_opts = fast_monitor_opts();
    auto baseline = run_simulation({submit("a", 0.0, 18.0, "light", 1, 2)}, models, base_opts);

    auto opts = fast_monitor_opts();
    opts.stragglers.push_back({"a", 0, 5, 30});
    auto delayed = run_simulation({submit("a", 0.0, 18.0, "light", 1, 2)}, models, opts);

    CHECK(baseline.jobs.at("a").completions == delayed.jobs.at("a").completions);
}

TEST_CASE("a postponing straggler delays only its own job, by at most one iteration") {
    std::map<std::string, JobProfile> models;
    models.emplace("half", make_job("half", 600, {200}, {100}, 1, 2));
    models.emplace("full", make_job("full", 1200, {300}, {200}, 1, 2));
    std::vector<io::TraceRecord> trace{submit("a", 0.0, 24.0, "half", 1, 2),
                                       submit("b", 0.0, 24.0, "full", 1, 2)};

    auto baseline = run_simulation(trace, models, fast_monitor_opts());

    auto opts = fast_monitor_opts();
    opts.stragglers.push_back({"a", 1, 5, 90});  // pushes land mid-slot of b
    auto delayed = run_simulation(trace, models, opts);

    // The co-located job's completion times are untouched.
    CHECK(baseline.jobs.at("b").completions == delayed.jobs.at("b").completions);
    // The straggling job slips by at most one effective iteration.
    const auto& base_c = baseline.jobs.at("a").completions;
    const auto& del_c = delayed.jobs.at("a").completions;
    REQUIRE(del_c.size() >= 20);
    for (std::size_t i = 0; i < std::min(base_c.size(), del_c.size()); ++i) {
        CHECK(del_c[i] >= base_c[i]);
        CHECK(del_c[i] - base_c[i] <= 600);
    }
}

TEST_CASE("randomized stragglers never disturb co-located jobs") {
    std::map<std::string, JobProfile> models;
    models.emplace("half", make_job("half", 600, {200}, {100}, 1, 2));
    models.emplace("full", make_job("full", 1200, {300}, {200}, 1, 2));
    std::vector<io::TraceRecord> trace{submit("a", 0.0, 18.0, "half", 1, 2),
                                       submit("b", 0.0, 18.0, "full", 1, 2)};
    auto baseline = run_simulation(trace, models, fast_monitor_opts());

    psim::test::TestRng rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        auto opts = fast_monitor_opts();
        StragglerInjection s;
        const bool hit_a = rng.range(0, 1) == 0;
        s.job_id = hit_a ? "a" : "b";
        s.worker = static_cast<int>(rng.range(0, 1));
        s.at_iteration = rng.range(12, 24);  // after the probation window
        s.delay_ms = rng.range(0, hit_a ? 600 : 1200);
        opts.stragglers.push_back(s);
        auto run = run_simulation(trace, models, opts);
        CAPTURE(trial);
        CAPTURE(s.job_id);
        CAPTURE(s.worker);
        CAPTURE(s.at_iteration);
        CAPTURE(s.delay_ms);

        const JobId other = hit_a ? "b" : "a";
        CHECK(baseline.jobs.at(other).completions == run.jobs.at(other).completions);
        const auto& base_c = baseline.jobs.at(s.job_id).completions;
        const auto& del_c = run.jobs.at(s.job_id).completions;
        const TimeMs own_d = hit_a ? 600 : 1200;
        for (std::size_t i = 0; i < std::min(base_c.size(), del_c.size()); ++i) {
            CHECK(del_c[i] - base_c[i] <= own_d);
        }
    }
}

TEST_CASE("identical runs emit bit-identical event logs") {
    std::map<std::string, JobProfile> models;
    models.emplace("half", make_job("half", 600, {200}, {100}, 1, 2));
    models.emplace("full", make_job("full", 1200, {300}, {200}, 1, 2));
    std::vector<io::TraceRecord> trace{submit("a", 0.0, 18.0, "half", 1, 2),
                                       submit("b", 0.4, 18.0, "full", 1, 2)};

    std::ostringstream log1, log2;
    {
        StreamSink sink(log1);
        run_simulation(trace, models, fast_monitor_opts(), &sink);
    }
    {
        StreamSink sink(log2);
        run_simulation(trace, models, fast_monitor_opts(), &sink);
    }
    CHECK(log1.str() == log2.str());
    CHECK(!log1.str().empty());
}

TEST_CASE("replaying the event log reproduces the metrics report") {
    std::map<std::string, JobProfile> models;
    models.emplace("half", make_job("half", 600, {200}, {100}, 1, 2));
    models.emplace("full", make_job("full", 1200, {300}, {200}, 1, 2));
    std::vector<io::TraceRecord> trace{submit("a", 0.0, 18.0, "half", 1, 2),
                                       submit("b", 0.4, 18.0, "full", 1, 2)};

    std::ostringstream log;
    StreamSink sink(log);
    auto opts = fast_monitor_opts();
    auto result = run_simulation(trace, models, opts, &sink);

    std::istringstream in(log.str());
    auto records = parse_event_log(in);
    auto replayed = collect_metrics(records, opts.config.interval_ms);
    CHECK(replayed == result.metrics);
}

TEST_CASE("a fast job joining busy aggregators is reverted onto a fresh one") {
    std::map<std::string, JobProfile> models;
    models.emplace("wide", make_job("wide", 1000, {300, 300, 300, 300}, {100, 400, 100, 400}));
    models.emplace("quick", make_job("quick", 100, {30, 30}, {20, 40}));

    std::vector<io::TraceRecord> trace{submit("vgg", 0.0, 120.0, "wide", 2, 2),
                                       submit("alex", 30.0, 45.0, "quick", 2, 2)};
    auto opts = fast_monitor_opts(100);
    VectorSink sink(RecordLevel::info);
    auto result = run_simulation(trace, models, opts, &sink);

    // One revert, after which the fast job holds its own fresh aggregator.
    CHECK(result.jobs.at("alex").reverts == 1);

    // Ordered event shape: revert -> new aggregator -> recovery -> release.
    int phase = 0;
    for (const auto& r : sink.records()) {
        if (r.kind == "revert" && *r.field("job") == "alex" && phase == 0) phase = 1;
        if (r.kind == "alloc_agg" && r.int_field("agg") == 3 && phase == 1) phase = 2;
        if (r.kind == "MonitorTick" && *r.field("job") == "alex" && phase == 2 &&
            r.int_field("probation") == 0) {
            const Rational loss(r.int_field("loss_num"), r.int_field("loss_den"));
            CHECK(loss < Rational(1, 10));
            phase = 3;
        }
        if (r.kind == "JobExit" && *r.field("job") == "alex" && phase == 3) phase = 4;
        if (r.kind == "release_agg" && r.int_field("agg") == 3 && phase == 4) phase = 5;
    }
    CHECK(phase == 5);

    // Both jobs end under the loss limit.
    CHECK(result.metrics.steady_perf.at("alex") >= 0.9);
    CHECK(result.metrics.normalized_perf.at("vgg") >= 0.9);
}

TEST_CASE("mild interference is tolerated, heavy interference migrates the job") {
    std::map<std::string, JobProfile> models;
    // 12.5 MB tensors: one millisecond of base transfer per push or pull.
    models.emplace("net", make_job("net", 1000, {100, 100}, {300, 500}, 1, 2, 12'500'000));
    // Too big to share the victim's aggregator; lands on its own with room.
    models.emplace("filler", make_job("filler", 1000, {450}, {100}, 1, 1, 2'000'000));
    std::vector<io::TraceRecord> trace{submit("victim", 0.0, 120.0, "net", 1, 2),
                                       submit("bystander", 1.0, 120.0, "filler", 1, 1)};

    SUBCASE("mild slowdown stays below the loss limit") {
        auto opts = fast_monitor_opts(10);
        std::vector<InterferenceSpec> specs{{1, 30'000, 90'000, 100}};
        SimResult result;
        auto points = run_interference_scenario(trace, models, opts, specs, false, &result);
        CHECK(result.metrics.migrations_completed == 0);
        double worst = 1.0;
        for (const auto& p : points) {
            if (p.job_id == "victim") worst = std::min(worst, p.normalized_perf);
        }
        CHECK(worst < 1.0);
        CHECK(worst >= 0.9);
    }

    SUBCASE("heavy slowdown triggers migration off the interfered aggregator") {
        auto opts = fast_monitor_opts(10);
        std::vector<InterferenceSpec> specs{{1, 30'000, 100'000, 400}};
        SimResult result;
        auto points = run_interference_scenario(trace, models, opts, specs, false, &result);
        CHECK(result.metrics.migrations_completed == 2);  // both tensors moved
        // After migration the victim recovers to standalone speed.
        double last = 0.0;
        for (const auto& p : points) {
            if (p.job_id == "victim") last = p.normalized_perf;
        }
        CHECK(last >= 0.9);
    }
}

TEST_CASE("job exit releases sole-tenant aggregators and recycles the rest") {
    std::map<std::string, JobProfile> models;
    models.emplace("small", make_job("small", 1000, {200}, {100}, 1, 1));
    models.emplace("wide", make_job("wide", 1000, {300, 300, 300, 300}, {100, 400, 100, 400}));

    // The wide job needs two aggregators; the small jobs pack around it.
    std::vector<io::TraceRecord> trace{
        submit("w", 0.0, 90.0, "wide", 2, 2),
        submit("s1", 2.0, 30.0, "small", 1, 1),
        submit("s2", 4.0, 90.0, "small", 1, 1),
    };
    VectorSink sink(RecordLevel::info);
    auto result = run_simulation(trace, models, fast_monitor_opts(10), &sink);

    int releases = 0;
    for (const auto& r : sink.records()) {
        if (r.kind == "release_agg") ++releases;
    }
    CHECK(releases >= 1);  // everything is gone by the end of the run
    CHECK(result.metrics.jobs_finished == 3);
}
