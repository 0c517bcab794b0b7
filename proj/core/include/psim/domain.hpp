#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "psim/rational.hpp"

namespace psim {

using TimeMs = std::int64_t;
using JobId = std::string;
using TaskId = std::string;
using AggId = std::uint64_t;
using ClusterId = std::uint64_t;

/// One tensor's aggregation task: CPU time per aggregation and payload size.
struct AggTask {
    TaskId task_id;
    JobId job_id;
    TimeMs exec_time_ms = 0;
    std::int64_t size_bytes = 0;
};

/// A training job's profiled characteristics: iteration duration, its
/// aggregation tasks, the parameter-server count it would request under a
/// classic per-job deployment, and per-task push-ready offsets within an
/// iteration.
struct JobProfile {
    JobId job_id;
    TimeMs iter_duration_ms = 0;  // profiled standalone iteration duration
    std::vector<AggTask> tasks;
    int required_servers = 1;
    int num_workers = 1;
    /// Offset within an iteration, per task, at which the push can arrive.
    /// Empty means "use default_ready_offsets".
    std::vector<TimeMs> tensor_ready_offsets_ms;

    TimeMs total_exec_ms() const;
    TimeMs ready_offset(std::size_t task_index) const;

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

/// Default push-ready offsets: tasks become ready evenly spaced across the
/// final half of the iteration, matching back-propagation order.
std::vector<TimeMs> default_ready_offsets(TimeMs iter_duration_ms, std::size_t num_tasks);

/// Observed runtime of a job: measured mean iteration duration over a
/// monitoring window, kept exact.
struct JobRuntime {
    JobId job_id;
    Rational current_iter_duration_ms{0};
    Rational measured_speed{0};  // iterations per second, 1000 / duration
    std::int64_t iterations_observed = 0;
};

enum class AggStatus { active, draining, released };

/// One scheduled execution slot inside an aggregator's cycle.
struct SlotEntry {
    JobId job_id;
    TaskId task_id;
    int rep = 0;          // repetition index within the cycle, per job
    TimeMs start_ms = 0;  // offset within [0, cycle_ms)
    TimeMs duration_ms = 0;
};

/// An aggregator: one logical CPU timeline hosting aggregation tasks from
/// potentially many jobs, executed on a repeating cycle.
struct AggregatorState {
    AggId agg_id = 0;
    ClusterId cluster_id = 0;
    std::map<JobId, std::vector<AggTask>> assigned;
    TimeMs cycle_ms = 0;
    std::vector<SlotEntry> slot_schedule;
    AggStatus status = AggStatus::active;

    bool empty() const { return assigned.empty(); }
    TimeMs scheduled_ms() const;
    /// scheduled_ms / cycle_ms as an exact fraction (0 when cycle is 0).
    Rational load() const;
    std::vector<const AggTask*> tasks_of(const JobId& job) const;
};

/// Task-to-aggregator mapping in relational form, so that invalid states
/// (duplicate placements) are representable for validation.
struct Assignment {
    struct Entry {
        JobId job_id;
        TaskId task_id;
        AggId agg_id;
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;

    void add(const JobId& job, const TaskId& task, AggId agg);
    void erase_job(const JobId& job);
    /// Jobs in first-assignment order; placement processes them this way so
    /// earlier tenants keep their claim on the cyclic timeline.
    std::vector<JobId> job_order() const;
    /// Aggregators hosting any task of `job`, ascending.
    std::vector<AggId> aggs_of(const JobId& job) const;
    /// Aggregator of (job, task); throws std::out_of_range when unassigned.
    AggId agg_of(const JobId& job, const TaskId& task) const;
    bool contains(const JobId& job, const TaskId& task) const;
    bool operator==(const Assignment&) const = default;
};

// ---------------------------------------------------------------------------
// Cyclic-execution arithmetic
// ---------------------------------------------------------------------------

/// Execution cycle of an aggregator serving the given jobs: the largest
/// profiled iteration duration among them, 0 for the empty set.
TimeMs compute_cycle(std::span<const JobProfile> jobs_on_agg);
TimeMs compute_cycle(std::span<const JobProfile* const> jobs_on_agg);

/// Effective iteration duration of a job with profiled duration D hosted on
/// a cycle C: max(D, C / floor(C / D)). Requires C >= D > 0.
Rational effective_iteration(TimeMs profiled_ms, TimeMs cycle_ms);

/// Fractional training-speed loss (d - D) / d. Requires d >= D > 0.
Rational perf_loss(TimeMs profiled_ms, const Rational& current_ms);
Rational perf_loss(TimeMs profiled_ms, TimeMs current_ms);

/// Free CPU time within one cycle: C - sum over jobs of
/// floor(C / d_j) * (total exec time of the job's tasks on this aggregator).
/// May return a negative value; negative means the aggregator would be
/// overloaded and the assignment is invalid.
std::int64_t free_slots(const AggregatorState& agg, TimeMs est_cycle_ms,
                        const std::map<JobId, Rational>& est_iters);

/// Free slots of a materialized state (cycle and local effective durations
/// derived from the stored assignment).
std::int64_t free_slots(const AggregatorState& agg, const std::map<JobId, JobProfile>& profiles);

}  // namespace psim
