#include "psim/domain.hpp"

#include <algorithm>
#include <stdexcept>

namespace psim {

TimeMs JobProfile::total_exec_ms() const {
    TimeMs sum = 0;
    for (const auto& t : tasks) sum += t.exec_time_ms;
    return sum;
}

TimeMs JobProfile::ready_offset(std::size_t task_index) const {
    if (task_index >= tasks.size()) throw std::out_of_range("task index out of range");
    if (tensor_ready_offsets_ms.empty()) {
        return default_ready_offsets(iter_duration_ms, tasks.size())[task_index];
    }
    return tensor_ready_offsets_ms.at(task_index);
}

void JobProfile::validate() const {
    if (iter_duration_ms <= 0) {
        throw std::invalid_argument("job " + job_id + ": iter_duration_ms must be positive");
    }
    if (tasks.empty()) {
        throw std::invalid_argument("job " + job_id + ": needs at least one task");
    }
    if (required_servers < 1 || num_workers < 1) {
        throw std::invalid_argument("job " + job_id + ": required_servers and num_workers must be >= 1");
    }
    std::vector<TaskId> seen;
    for (const auto& t : tasks) {
        if (t.exec_time_ms <= 0) {
            throw std::invalid_argument("task " + t.task_id + ": exec_time_ms must be positive");
        }
        if (t.size_bytes <= 0) {
            throw std::invalid_argument("task " + t.task_id + ": size_bytes must be positive");
        }
        if (t.exec_time_ms > iter_duration_ms) {
            throw std::invalid_argument("task " + t.task_id + ": exec_time_ms exceeds iteration duration");
        }
        if (std::find(seen.begin(), seen.end(), t.task_id) != seen.end()) {
            throw std::invalid_argument("job " + job_id + ": duplicate task_id " + t.task_id);
        }
        seen.push_back(t.task_id);
    }
    if (total_exec_ms() > iter_duration_ms * required_servers) {
        throw std::invalid_argument("job " + job_id +
                                    ": total exec time exceeds declared server capacity");
    }
    if (!tensor_ready_offsets_ms.empty()) {
        if (tensor_ready_offsets_ms.size() != tasks.size()) {
            throw std::invalid_argument("job " + job_id + ": offsets must match task count");
        }
        for (TimeMs off : tensor_ready_offsets_ms) {
            if (off < 0 || off >= iter_duration_ms) {
                throw std::invalid_argument("job " + job_id + ": ready offset outside iteration");
            }
        }
    }
}

std::vector<TimeMs> default_ready_offsets(TimeMs iter_duration_ms, std::size_t num_tasks) {
    std::vector<TimeMs> offsets(num_tasks);
    const TimeMs half = iter_duration_ms / 2;
    for (std::size_t i = 0; i < num_tasks; ++i) {
        offsets[i] = half + static_cast<TimeMs>((static_cast<std::int64_t>(i) * half) /
                                                static_cast<std::int64_t>(num_tasks));
        if (offsets[i] >= iter_duration_ms) offsets[i] = iter_duration_ms - 1;
    }
    return offsets;
}

TimeMs AggregatorState::scheduled_ms() const {
    TimeMs sum = 0;
    for (const auto& s : slot_schedule) sum += s.duration_ms;
    return sum;
}

Rational AggregatorState::load() const {
    if (cycle_ms == 0) return Rational(0);
    return Rational(scheduled_ms(), cycle_ms);
}

std::vector<const AggTask*> AggregatorState::tasks_of(const JobId& job) const {
    std::vector<const AggTask*> out;
    auto it = assigned.find(job);
    if (it == assigned.end()) return out;
    for (const auto& t : it->second) out.push_back(&t);
    return out;
}

void Assignment::add(const JobId& job, const TaskId& task, AggId agg) {
    entries.push_back({job, task, agg});
}

void Assignment::erase_job(const JobId& job) {
    std::erase_if(entries, [&](const Entry& e) { return e.job_id == job; });
}

std::vector<JobId> Assignment::job_order() const {
    std::vector<JobId> out;
    for (const auto& e : entries) {
        if (std::find(out.begin(), out.end(), e.job_id) == out.end()) out.push_back(e.job_id);
    }
    return out;
}

std::vector<AggId> Assignment::aggs_of(const JobId& job) const {
    std::vector<AggId> out;
    for (const auto& e : entries) {
        if (e.job_id == job) out.push_back(e.agg_id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

AggId Assignment::agg_of(const JobId& job, const TaskId& task) const {
    for (const auto& e : entries) {
        if (e.job_id == job && e.task_id == task) return e.agg_id;
    }
    throw std::out_of_range("unassigned task " + job + "/" + task);
}

bool Assignment::contains(const JobId& job, const TaskId& task) const {
    for (const auto& e : entries) {
        if (e.job_id == job && e.task_id == task) return true;
    }
    return false;
}

TimeMs compute_cycle(std::span<const JobProfile> jobs_on_agg) {
    TimeMs cycle = 0;
    for (const auto& j : jobs_on_agg) cycle = std::max(cycle, j.iter_duration_ms);
    return cycle;
}

TimeMs compute_cycle(std::span<const JobProfile* const> jobs_on_agg) {
    TimeMs cycle = 0;
    for (const auto* j : jobs_on_agg) cycle = std::max(cycle, j->iter_duration_ms);
    return cycle;
}

Rational effective_iteration(TimeMs profiled_ms, TimeMs cycle_ms) {
    if (profiled_ms <= 0) throw std::invalid_argument("effective_iteration: D must be positive");
    if (cycle_ms < profiled_ms) {
        throw std::invalid_argument("effective_iteration: cycle below iteration duration");
    }
    const std::int64_t reps = cycle_ms / profiled_ms;  // floor(C / D) >= 1
    return rational_max(Rational(profiled_ms), Rational(cycle_ms, reps));
}

Rational perf_loss(TimeMs profiled_ms, const Rational& current_ms) {
    if (profiled_ms <= 0) throw std::invalid_argument("perf_loss: D must be positive");
    if (current_ms < Rational(profiled_ms)) {
        throw std::invalid_argument("perf_loss: current duration below profiled");
    }
    return (current_ms - Rational(profiled_ms)) / current_ms;
}

Rational perf_loss(TimeMs profiled_ms, TimeMs current_ms) {
    return perf_loss(profiled_ms, Rational(current_ms));
}

std::int64_t free_slots(const AggregatorState& agg, TimeMs est_cycle_ms,
                        const std::map<JobId, Rational>& est_iters) {
    std::int64_t used = 0;
    for (const auto& [job, tasks] : agg.assigned) {
        auto it = est_iters.find(job);
        if (it == est_iters.end()) {
            throw std::invalid_argument("free_slots: missing effective duration for job " + job);
        }
        const Rational& d = it->second;
        if (d.num() <= 0) throw std::invalid_argument("free_slots: non-positive duration");
        const std::int64_t reps = (Rational(est_cycle_ms) / d).floor();
        std::int64_t exec = 0;
        for (const auto& t : tasks) exec += t.exec_time_ms;
        used += reps * exec;
    }
    return est_cycle_ms - used;
}

std::int64_t free_slots(const AggregatorState& agg, const std::map<JobId, JobProfile>& profiles) {
    std::map<JobId, Rational> iters;
    for (const auto& [job, tasks] : agg.assigned) {
        const auto& p = profiles.at(job);
        iters.emplace(job, effective_iteration(p.iter_duration_ms, agg.cycle_ms));
    }
    return free_slots(agg, agg.cycle_ms, iters);
}

}  // namespace psim
