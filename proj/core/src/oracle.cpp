#include "psim/oracle.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>

namespace psim::oracle {

namespace {

struct FlatTask {
    const JobProfile* job;
    const AggTask* task;
};

/// Tasks in canonical order: jobs by id, tasks by id within the job.
std::vector<FlatTask> flatten(const std::vector<JobProfile>& jobs) {
    std::vector<const JobProfile*> ordered;
    for (const auto& j : jobs) ordered.push_back(&j);
    std::sort(ordered.begin(), ordered.end(),
              [](const JobProfile* a, const JobProfile* b) { return a->job_id < b->job_id; });
    std::vector<FlatTask> out;
    for (const auto* j : ordered) {
        std::vector<const AggTask*> tasks;
        for (const auto& t : j->tasks) tasks.push_back(&t);
        std::sort(tasks.begin(), tasks.end(),
                  [](const AggTask* a, const AggTask* b) { return a->task_id < b->task_id; });
        for (const auto* t : tasks) out.push_back({j, t});
    }
    return out;
}

}  // namespace

AssignmentMetrics assignment_metrics(const Assignment& assignment,
                                     const std::vector<JobProfile>& jobs) {
    AssignmentMetrics m;
    std::map<JobId, const JobProfile*> by_id;
    for (const auto& j : jobs) by_id[j.job_id] = &j;

    for (const auto& e : assignment.entries) {
        const JobProfile* p = by_id.at(e.job_id);
        auto [it, inserted] = m.cycles.emplace(e.agg_id, p->iter_duration_ms);
        if (!inserted) it->second = std::max(it->second, p->iter_duration_ms);
    }
    // d_j: a job runs as slowly as its slowest hosting aggregator.
    for (const auto& e : assignment.entries) {
        const JobProfile* p = by_id.at(e.job_id);
        Rational d = effective_iteration(p->iter_duration_ms, m.cycles.at(e.agg_id));
        auto [it, inserted] = m.durations.emplace(e.job_id, d);
        if (!inserted) it->second = rational_max(it->second, d);
    }
    for (const auto& [job, d] : m.durations) {
        Rational loss = perf_loss(by_id.at(job)->iter_duration_ms, d);
        m.losses.emplace(job, loss);
        m.max_loss = rational_max(m.max_loss, loss);
    }
    // W_n = sum of exec * floor(C_n / d_j) over tasks placed on n.
    std::map<std::pair<JobId, TaskId>, TimeMs> exec;
    for (const auto& j : jobs) {
        for (const auto& t : j.tasks) exec[{j.job_id, t.task_id}] = t.exec_time_ms;
    }
    for (const auto& e : assignment.entries) {
        const TimeMs cycle = m.cycles.at(e.agg_id);
        const Rational& d = m.durations.at(e.job_id);
        const std::int64_t reps = (Rational(cycle) / d).floor();
        m.work[e.agg_id] += reps * exec.at({e.job_id, e.task_id});
    }
    for (const auto& [agg, w] : m.work) {
        if (w > m.cycles.at(agg)) m.overloaded = true;
    }
    return m;
}

ExactSolution solve_exact(const ExactInstance& inst) {
    if (inst.num_aggs < 1) throw std::invalid_argument("solve_exact: need at least one aggregator");
    const auto flat = flatten(inst.jobs);
    const std::size_t n_tasks = flat.size();
    if (n_tasks == 0) throw std::invalid_argument("solve_exact: no tasks");

    double combos = 1;
    for (std::size_t i = 0; i < n_tasks; ++i) {
        combos *= inst.num_aggs;
        if (combos > 1e7) {
            throw std::invalid_argument("solve_exact: instance exceeds enumeration guard");
        }
    }

    ExactSolution best;
    std::vector<int> vec(n_tasks, 0);
    bool more = true;
    while (more) {
        Assignment a;
        for (std::size_t i = 0; i < n_tasks; ++i) {
            a.add(flat[i].job->job_id, flat[i].task->task_id,
                  static_cast<AggId>(vec[i] + 1));
        }
        AssignmentMetrics m = assignment_metrics(a, inst.jobs);
        if (!m.overloaded) {
            // Enumeration is lexicographic, so the first solution at a given
            // loss is already the lexicographically smallest.
            if (!best.feasible || m.max_loss < best.max_loss) {
                best.feasible = true;
                best.max_loss = m.max_loss;
                best.assignment = std::move(a);
            }
        }
        // Next assignment vector, lexicographic.
        more = false;
        for (std::size_t i = n_tasks; i-- > 0;) {
            if (++vec[i] < inst.num_aggs) {
                more = true;
                break;
            }
            vec[i] = 0;
        }
    }
    return best;
}

ValidationReport validate_assignment(const Assignment& assignment,
                                     const std::vector<JobProfile>& jobs,
                                     const std::vector<AggId>& aggs) {
    ValidationReport report;
    // Every task of every job must appear exactly once, on a known aggregator.
    std::map<std::pair<JobId, TaskId>, int> counts;
    for (const auto& j : jobs) {
        for (const auto& t : j.tasks) counts[{j.job_id, t.task_id}] = 0;
    }
    for (const auto& e : assignment.entries) {
        auto it = counts.find({e.job_id, e.task_id});
        if (it == counts.end()) {
            report.violations.push_back({Violation::Kind::placement_count,
                                         "unknown task " + e.job_id + "/" + e.task_id});
            continue;
        }
        ++it->second;
        if (!aggs.empty() && std::find(aggs.begin(), aggs.end(), e.agg_id) == aggs.end()) {
            report.violations.push_back({Violation::Kind::placement_count,
                                         "task " + e.job_id + "/" + e.task_id +
                                             " on unknown aggregator " + std::to_string(e.agg_id)});
        }
    }
    for (const auto& [key, count] : counts) {
        if (count != 1) {
            report.violations.push_back(
                {Violation::Kind::placement_count,
                 "task " + key.first + "/" + key.second + " placed " + std::to_string(count) +
                     " times"});
        }
    }
    if (!report.violations.empty()) return report;

    AssignmentMetrics m = assignment_metrics(assignment, jobs);
    for (const auto& [agg, w] : m.work) {
        const TimeMs cycle = m.cycles.at(agg);
        if (w > cycle) {
            report.violations.push_back({Violation::Kind::overload,
                                         "aggregator " + std::to_string(agg) + " loaded " +
                                             std::to_string(w) + "ms over cycle " +
                                             std::to_string(cycle) + "ms"});
        }
    }
    return report;
}

}  // namespace psim::oracle
