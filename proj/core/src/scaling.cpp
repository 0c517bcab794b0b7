#include "psim/scaling.hpp"

#include <algorithm>

#include "psim/placement.hpp"

namespace psim::scaling {

void ScalingConfig::validate() const {
    if (scaling_period_ms <= 0) throw std::invalid_argument("scaling_period must be positive");
    if (ondemand_threshold < 1) throw std::invalid_argument("ondemand_threshold must be >= 1");
    if (max_aggs_per_cluster < 1) throw std::invalid_argument("max_aggs_per_cluster must be >= 1");
    if (headroom < Rational(1)) throw std::invalid_argument("headroom must be >= 1");
}

std::int64_t ClusterState::free_cpu_ms(const std::map<JobId, JobProfile>& profiles) const {
    std::int64_t total = 0;
    for (const auto& [id, agg] : sched.aggs) {
        if (agg.status != AggStatus::active) continue;
        total += free_slots(agg, profiles);
    }
    return total;
}

int ClusterState::active_agg_count() const {
    int n = 0;
    for (const auto& [id, agg] : sched.aggs) {
        if (agg.status == AggStatus::active) ++n;
    }
    return n;
}

int ClusterState::empty_active_agg_count() const {
    int n = 0;
    for (const auto& [id, agg] : sched.aggs) {
        if (agg.status == AggStatus::active && agg.empty()) ++n;
    }
    return n;
}

ClusterChoice select_cluster(const JobProfile& job, const std::vector<ClusterState*>& clusters,
                             const std::map<JobId, JobProfile>& profiles) {
    if (clusters.empty()) throw std::invalid_argument("select_cluster: no clusters");
    const std::int64_t demand = job.total_exec_ms();

    const ClusterState* best_fit = nullptr;
    std::int64_t best_free = 0;
    const ClusterState* most_free = nullptr;
    std::int64_t most = -1;
    for (const ClusterState* c : clusters) {
        const std::int64_t free = c->free_cpu_ms(profiles);
        if (free >= demand && (best_fit == nullptr || free < best_free)) {
            best_fit = c;
            best_free = free;
        }
        if (free > most) {
            most_free = c;
            most = free;
        }
    }
    if (best_fit != nullptr) return {best_fit->cluster_id, false};
    return {most_free->cluster_id, true};
}

ArrivalController::ArrivalController(JobId job, int required_servers, AssignConfig cfg)
    : job_(std::move(job)), required_servers_(required_servers), cfg_(std::move(cfg)) {}

ArrivalController::Decision ArrivalController::on_probation_result(
    const std::map<JobId, Rational>& measured_losses, const std::vector<AggId>& hosting) {
    bool over_limit = false;
    for (const auto& [job, loss] : measured_losses) {
        if (loss >= cfg_.loss_limit) {
            over_limit = true;
            break;
        }
    }
    if (!over_limit) return {Decision::Kind::settle, {}};
    // The loop never grants a job more fresh aggregators than it would have
    // had as dedicated parameter servers; at that point it runs standalone.
    if (rounds_ >= required_servers_) return {Decision::Kind::settle, {}};
    ++rounds_;
    exclude_.insert(hosting.begin(), hosting.end());
    return {Decision::Kind::revert, exclude_};
}

std::vector<AggId> remove_job(SchedulerState& state, const JobId& job,
                              const std::map<JobId, JobProfile>& profiles) {
    state.assignment.erase_job(job);
    std::vector<AggId> emptied;
    for (auto& [id, agg] : state.aggs) {
        if (agg.assigned.erase(job) != 0 && agg.empty() && agg.status == AggStatus::active) {
            emptied.push_back(id);
        }
    }
    rebuild_schedules(state.aggs, profiles, state.assignment.job_order(),
                      PlacementEffort::resilient);
    return emptied;
}

RecyclePlan recycle_least_loaded(const SchedulerState& state,
                                 const std::map<JobId, JobProfile>& profiles,
                                 const AssignConfig& cfg, const std::set<JobId>& frozen_jobs,
                                 const std::set<AggId>& ineligible,
                                 const std::map<JobId, std::set<AggId>>& job_excludes) {
    RecyclePlan plan;
    plan.result = state;

    while (true) {
        // Least-loaded active aggregator that still hosts work; ties by id.
        // Aggregators serving an in-flight migration stay put.
        const AggregatorState* victim = nullptr;
        Rational victim_load{0};
        int candidates = 0;
        for (const auto& [id, agg] : plan.result.aggs) {
            if (agg.status != AggStatus::active || agg.empty()) continue;
            ++candidates;
            if (ineligible.contains(id)) continue;
            bool frozen = false;
            for (const auto& [job, tasks] : agg.assigned) {
                if (frozen_jobs.contains(job)) frozen = true;
            }
            if (frozen) continue;
            const Rational load = agg.load();
            if (victim == nullptr || load < victim_load) {
                victim = &agg;
                victim_load = load;
            }
        }
        if (victim == nullptr || candidates < 2) break;

        const AggId victim_id = victim->agg_id;
        SchedulerState snapshot = plan.result;

        // Pull the victim's whole workload out, then re-place it with
        // allocations disabled and the victim off-limits.
        struct Pending {
            AggTask task;
            const JobProfile* owner;
        };
        std::vector<Pending> pending;
        for (const auto& [job, tasks] : plan.result.aggs.at(victim_id).assigned) {
            for (const auto& t : tasks) pending.push_back({t, &profiles.at(job)});
        }
        std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
            if (a.task.exec_time_ms != b.task.exec_time_ms) {
                return a.task.exec_time_ms > b.task.exec_time_ms;
            }
            if (a.task.job_id != b.task.job_id) return a.task.job_id < b.task.job_id;
            return a.task.task_id < b.task.task_id;
        });
        for (const auto& p : pending) {
            std::erase_if(plan.result.assignment.entries, [&](const Assignment::Entry& e) {
                return e.job_id == p.task.job_id && e.task_id == p.task.task_id;
            });
        }
        plan.result.aggs.at(victim_id).assigned.clear();
        rebuild_schedules(plan.result.aggs, profiles, plan.result.assignment.job_order());

        bool ok = true;
        std::vector<TaskMove> moves;
        for (const auto& p : pending) {
            AssignOptions opts;
            opts.allow_alloc = false;
            opts.exclude.insert(victim_id);
            auto ex = job_excludes.find(p.task.job_id);
            if (ex != job_excludes.end()) {
                opts.exclude.insert(ex->second.begin(), ex->second.end());
            }
            auto res = assign_task(plan.result, p.task, *p.owner, profiles, cfg, opts);
            if (!res) {
                ok = false;
                break;
            }
            moves.push_back({p.task.job_id, p.task.task_id, victim_id, res->agg_id});
        }
        if (!ok) {
            plan.result = std::move(snapshot);  // transactional rollback
            break;
        }
        plan.result.aggs.at(victim_id).status = AggStatus::released;
        plan.released.push_back(victim_id);
        plan.moves.insert(plan.moves.end(), moves.begin(), moves.end());
    }
    return plan;
}

RescaleActions periodic_rescale(const ClusterState& cluster,
                                const std::map<JobId, JobProfile>& profiles,
                                const PeriodStats& stats, const ScalingConfig& cfg) {
    RescaleActions actions;
    const Rational target_r = Rational(stats.peak_demand_aggs) * cfg.headroom;
    const int target = static_cast<int>(target_r.ceil());

    int active = cluster.active_agg_count();
    // Surplus empty aggregators go first, newest allocations first.
    std::vector<AggId> empties;
    for (const auto& [id, agg] : cluster.sched.aggs) {
        if (agg.status == AggStatus::active && agg.empty()) empties.push_back(id);
    }
    std::sort(empties.rbegin(), empties.rend());
    for (AggId id : empties) {
        if (active <= target) break;
        actions.release_empty.push_back(id);
        --active;
    }
    if (active < target && stats.blocked_requests > 0) {
        actions.provision = std::min(target - active, stats.blocked_requests);
    }
    actions.remove_cluster = cluster.jobs_served.empty() && stats.peak_demand_aggs == 0;
    return actions;
}

}  // namespace psim::scaling
