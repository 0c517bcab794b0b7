#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "psim/domain.hpp"

namespace psim {

/// Tuning knobs for the assignment heuristic and its measured-feedback gate.
struct AssignConfig {
    Rational loss_limit{1, 10};       // max tolerated per-job loss
    int monitor_iterations = 100;     // iterations observed before feedback
    Rational low_perf_threshold{9, 10};  // measured-performance floor vs standalone

    void validate() const;
};

/// What placing one task on one aggregator would do to everyone hosted
/// there, including the task's own job. Estimation never mutates state.
struct ImpactEstimate {
    AggId agg_id = 0;
    TimeMs est_cycle_ms = 0;
    std::map<JobId, Rational> est_iters;   // effective durations at est_cycle
    std::map<JobId, Rational> est_losses;  // per-job fractional loss
    std::int64_t est_free_ms = 0;          // may be negative: no room
    bool qualified = false;                // all losses < loss_limit
};

/// Mutable scheduler state for one aggregator pool: the aggregators, the
/// relational assignment, and the id counter for fresh allocations.
/// Single-writer: one assignment transaction at a time.
struct SchedulerState {
    ClusterId cluster_id = 0;
    std::map<AggId, AggregatorState> aggs;
    Assignment assignment;
    AggId next_agg_id = 1;

    AggregatorState& allocate_aggregator();
    /// Active aggregators in ascending id order (canonical scan order).
    std::vector<AggId> active_aggs() const;
};

struct AssignOptions {
    bool allow_alloc = true;
    std::set<AggId> exclude;  // aggregators never considered as destinations
};

struct AssignResult {
    AggId agg_id = 0;
    bool allocated_new = false;
};

/// Estimates the impact of assigning `task` (of job `owner`) to `agg`.
/// The estimate includes the candidate task's own job at its estimated
/// duration, so est_free_ms already accounts for the prospective placement.
ImpactEstimate estimate_impact(const AggTask& task, const JobProfile& owner,
                               const AggregatorState& agg,
                               const std::map<JobId, JobProfile>& profiles,
                               const AssignConfig& cfg);

/// Assigns one task: best-fit among qualified aggregators with enough free
/// slots (least free wins, ties by ascending id); otherwise a fresh
/// aggregator when allocation is allowed. Rebuilds affected schedules.
/// Returns nullopt only when nothing fits and allocation is disabled.
std::optional<AssignResult> assign_task(SchedulerState& state, const AggTask& task,
                                        const JobProfile& owner,
                                        const std::map<JobId, JobProfile>& profiles,
                                        const AssignConfig& cfg,
                                        const AssignOptions& options = {});

/// Assigns a whole job, tasks in descending exec-time order (ties by id).
/// Returns the job's entries in the state's assignment, or nullopt when the
/// job could not be fully placed (allocation disabled); in that case the
/// state is left unchanged.
std::optional<std::vector<Assignment::Entry>> assign_job(
    SchedulerState& state, const JobProfile& job, const std::map<JobId, JobProfile>& profiles,
    const AssignConfig& cfg, const AssignOptions& options = {});

/// Thrown by feedback_check when called before enough iterations.
struct InsufficientObservations : std::logic_error {
    using std::logic_error::logic_error;
};

enum class FeedbackDecision { keep, revert };

/// Measured-performance gate: revert when the observed loss against the
/// profiled standalone duration reaches the loss limit.
FeedbackDecision feedback_check(const JobRuntime& runtime, const JobProfile& profile,
                                const AssignConfig& cfg);

}  // namespace psim
