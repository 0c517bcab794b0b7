#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "psim/assignment.hpp"
#include "psim/domain.hpp"

namespace psim::scaling {

struct ScalingConfig {
    TimeMs scaling_period_ms = 60'000;
    int ondemand_threshold = 1;   // blocked allocation requests before immediate alloc
    int max_aggs_per_cluster = 64;
    Rational headroom{11, 10};    // periodic target = peak demand * headroom

    void validate() const;
};

/// One independent aggregator cluster with its own assignment scope. Every
/// job it serves lives entirely inside it.
struct ClusterState {
    ClusterId cluster_id = 0;
    SchedulerState sched;
    std::set<JobId> jobs_served;

    /// Aggregate free slot time per cycle over active aggregators.
    std::int64_t free_cpu_ms(const std::map<JobId, JobProfile>& profiles) const;
    int active_agg_count() const;
    int empty_active_agg_count() const;
};

struct ClusterChoice {
    ClusterId cluster_id = 0;
    bool needs_growth = false;  // no cluster had room; expect allocations
};

/// Best-fit cluster selection: sufficient but least free CPU; falls back to
/// the cluster with the most free capacity, flagged for growth.
ClusterChoice select_cluster(const JobProfile& job, const std::vector<ClusterState*>& clusters,
                             const std::map<JobId, JobProfile>& profiles);

// ---------------------------------------------------------------------------
// Arrival loop
// ---------------------------------------------------------------------------

/// Drives the feedback loop around a job arrival: assign, observe a
/// monitoring window, and either settle or revert-and-grow. The caller
/// performs the actual assignment, measurement and migration; this class
/// owns only the decision state (rounds, exclusions, termination bound).
class ArrivalController {
public:
    ArrivalController(JobId job, int required_servers, AssignConfig cfg);

    struct Decision {
        enum class Kind { settle, revert } kind = Kind::settle;
        /// Aggregators the re-assignment must avoid (every aggregator that
        /// hosted a failed attempt of this job).
        std::set<AggId> exclude;
    };

    /// Evaluates one finished probation window. `measured_losses` covers the
    /// job and every co-located job; `hosting` is the job's aggregator set.
    Decision on_probation_result(const std::map<JobId, Rational>& measured_losses,
                                 const std::vector<AggId>& hosting);

    int rounds() const { return rounds_; }
    const std::set<AggId>& excluded() const { return exclude_; }

    /// A clean monitoring window closes the episode; the next degradation
    /// gets a fresh revert budget (exclusions persist).
    void reset_budget() { rounds_ = 0; }

private:
    JobId job_;
    int required_servers_;
    AssignConfig cfg_;
    int rounds_ = 0;
    std::set<AggId> exclude_;
};

// ---------------------------------------------------------------------------
// Exit path and compaction
// ---------------------------------------------------------------------------

/// Removes a job from the scheduler state and rebuilds schedules. Returns
/// aggregators left empty, which the caller releases immediately.
std::vector<AggId> remove_job(SchedulerState& state, const JobId& job,
                              const std::map<JobId, JobProfile>& profiles);

struct TaskMove {
    JobId job_id;
    TaskId task_id;
    AggId from_agg = 0;
    AggId to_agg = 0;
};

struct RecyclePlan {
    std::vector<AggId> released;   // drained aggregators, in release order
    std::vector<TaskMove> moves;   // migrations realizing the drains
    SchedulerState result;         // state after the whole plan
};

/// Starting from the least-loaded active aggregator, tries to reassign its
/// whole workload elsewhere with allocations disabled. Each fully drained
/// aggregator is released and the loop repeats; the first failed drain rolls
/// back and stops. Pure planning; the caller realizes moves as migrations.
/// Jobs whose tensors are already migrating (`frozen_jobs`) pin their
/// aggregators, `ineligible` aggregators are never drained, and a drained
/// task never lands somewhere its job's measured feedback already rejected
/// (`job_excludes`).
RecyclePlan recycle_least_loaded(const SchedulerState& state,
                                 const std::map<JobId, JobProfile>& profiles,
                                 const AssignConfig& cfg,
                                 const std::set<JobId>& frozen_jobs = {},
                                 const std::set<AggId>& ineligible = {},
                                 const std::map<JobId, std::set<AggId>>& job_excludes = {});

// ---------------------------------------------------------------------------
// Hybrid periodic rescaling
// ---------------------------------------------------------------------------

struct PeriodStats {
    int peak_demand_aggs = 0;   // peak of allocated + blocked-for-allocation
    int blocked_requests = 0;
};

struct RescaleActions {
    std::vector<AggId> release_empty;  // surplus idle aggregators
    int provision = 0;                 // spares to allocate toward the target
    bool remove_cluster = false;       // cluster served nothing all period
};

RescaleActions periodic_rescale(const ClusterState& cluster,
                                const std::map<JobId, JobProfile>& profiles,
                                const PeriodStats& stats, const ScalingConfig& cfg);

}  // namespace psim::scaling
