#include "psim/assignment.hpp"

#include <algorithm>

#include "psim/placement.hpp"

namespace psim {

void AssignConfig::validate() const {
    if (!(Rational(0) < loss_limit && loss_limit < Rational(1))) {
        throw std::invalid_argument("loss_limit must be in (0, 1)");
    }
    if (monitor_iterations < 1) {
        throw std::invalid_argument("monitor_iterations must be >= 1");
    }
}

AggregatorState& SchedulerState::allocate_aggregator() {
    AggregatorState agg;
    agg.agg_id = next_agg_id++;
    agg.cluster_id = cluster_id;
    auto [it, inserted] = aggs.emplace(agg.agg_id, std::move(agg));
    return it->second;
}

std::vector<AggId> SchedulerState::active_aggs() const {
    std::vector<AggId> out;
    for (const auto& [id, agg] : aggs) {
        if (agg.status == AggStatus::active) out.push_back(id);
    }
    return out;
}

ImpactEstimate estimate_impact(const AggTask& task, const JobProfile& owner,
                               const AggregatorState& agg,
                               const std::map<JobId, JobProfile>& profiles,
                               const AssignConfig& cfg) {
    ImpactEstimate est;
    est.agg_id = agg.agg_id;
    est.est_cycle_ms = std::max(agg.cycle_ms, owner.iter_duration_ms);

    // Prospective state: the candidate task joins its job's tasks here.
    AggregatorState prospective = agg;
    prospective.assigned[owner.job_id].push_back(task);

    est.qualified = true;
    for (const auto& [job, tasks] : prospective.assigned) {
        const JobProfile& p = job == owner.job_id ? owner : profiles.at(job);
        Rational d = effective_iteration(p.iter_duration_ms, est.est_cycle_ms);
        Rational loss = perf_loss(p.iter_duration_ms, d);
        if (loss >= cfg.loss_limit) est.qualified = false;
        est.est_iters.emplace(job, d);
        est.est_losses.emplace(job, loss);
    }
    est.est_free_ms = free_slots(prospective, est.est_cycle_ms, est.est_iters);
    return est;
}

namespace {

/// Commits `task` onto `agg_id`, rebuilding schedules; false when the new
/// configuration has no feasible slot placement.
bool commit_task(SchedulerState& state, const AggTask& task, const JobProfile& owner,
                 const std::map<JobId, JobProfile>& profiles, AggId agg_id,
                 PlacementEffort effort = PlacementEffort::strict) {
    std::map<JobId, JobProfile> all = profiles;
    all.emplace(owner.job_id, owner);  // no-op when already present
    // Placement is per-aggregator; only the candidate needs rebuilding.
    AggregatorState trial = state.aggs.at(agg_id);
    trial.assigned[owner.job_id].push_back(task);
    if (!rebuild_schedule(trial, all, state.assignment.job_order(), effort)) return false;
    state.aggs.at(agg_id) = std::move(trial);
    state.assignment.add(owner.job_id, task.task_id, agg_id);
    return true;
}

}  // namespace

std::optional<AssignResult> assign_task(SchedulerState& state, const AggTask& task,
                                        const JobProfile& owner,
                                        const std::map<JobId, JobProfile>& profiles,
                                        const AssignConfig& cfg, const AssignOptions& options) {
    // Estimate all candidates, then take qualified ones with room, tightest
    // fit first. Scan order is canonical (ascending id) so ties are stable.
    struct Candidate {
        AggId id;
        std::int64_t est_free;
    };
    std::vector<Candidate> fits;
    for (AggId id : state.active_aggs()) {
        if (options.exclude.contains(id)) continue;
        ImpactEstimate est = estimate_impact(task, owner, state.aggs.at(id), profiles, cfg);
        if (!est.qualified) continue;
        if (est.est_free_ms < task.exec_time_ms) continue;
        fits.push_back({id, est.est_free_ms});
    }
    std::stable_sort(fits.begin(), fits.end(), [](const Candidate& a, const Candidate& b) {
        return a.est_free != b.est_free ? a.est_free < b.est_free : a.id < b.id;
    });
    for (const Candidate& c : fits) {
        if (commit_task(state, task, owner, profiles, c.id)) {
            return AssignResult{c.id, false};
        }
    }
    if (!options.allow_alloc) return std::nullopt;
    AggregatorState& fresh = state.allocate_aggregator();
    const AggId fresh_id = fresh.agg_id;
    // The task itself always fits an empty cycle; sibling placements may
    // have to degrade rather than veto the allocation.
    if (!commit_task(state, task, owner, profiles, fresh_id, PlacementEffort::resilient)) {
        throw std::runtime_error("fresh aggregator cannot host task " + task.task_id);
    }
    return AssignResult{fresh_id, true};
}

std::optional<std::vector<Assignment::Entry>> assign_job(
    SchedulerState& state, const JobProfile& job, const std::map<JobId, JobProfile>& profiles,
    const AssignConfig& cfg, const AssignOptions& options) {
    SchedulerState backup = state;
    std::vector<const AggTask*> order;
    for (const auto& t : job.tasks) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const AggTask* a, const AggTask* b) {
        if (a->exec_time_ms != b->exec_time_ms) return a->exec_time_ms > b->exec_time_ms;
        return a->task_id < b->task_id;
    });

    std::vector<Assignment::Entry> placed;
    for (const AggTask* t : order) {
        auto res = assign_task(state, *t, job, profiles, cfg, options);
        if (!res) {
            state = std::move(backup);
            return std::nullopt;
        }
        placed.push_back({job.job_id, t->task_id, res->agg_id});
    }
    return placed;
}

FeedbackDecision feedback_check(const JobRuntime& runtime, const JobProfile& profile,
                                const AssignConfig& cfg) {
    if (runtime.iterations_observed < cfg.monitor_iterations) {
        throw InsufficientObservations("job " + runtime.job_id + " observed only " +
                                       std::to_string(runtime.iterations_observed) +
                                       " iterations");
    }
    Rational measured = rational_max(runtime.current_iter_duration_ms,
                                     Rational(profile.iter_duration_ms));
    Rational loss = perf_loss(profile.iter_duration_ms, measured);
    return loss >= cfg.loss_limit ? FeedbackDecision::revert : FeedbackDecision::keep;
}

}  // namespace psim
