#include "psim/placement.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

namespace psim {
namespace {

constexpr TimeMs kNoDeadline = std::numeric_limits<TimeMs>::max();

struct Interval {
    TimeMs start;
    TimeMs end;
};

/// Busy intervals on one aggregator's cyclic timeline [0, cycle).
struct BusySet {
    TimeMs cycle = 0;
    std::vector<Interval> ivs;  // sorted by start, non-overlapping

    void add(TimeMs s, TimeMs e) {
        auto it = std::lower_bound(ivs.begin(), ivs.end(), s,
                                   [](const Interval& iv, TimeMs v) { return iv.start < v; });
        ivs.insert(it, {s, e});
    }

    const Interval* first_conflict(TimeMs s, TimeMs e) const {
        for (const auto& iv : ivs) {
            if (iv.start >= e) break;
            if (iv.end > s) return &iv;
        }
        return nullptr;
    }

    /// Earliest unrolled position p >= rel such that [p mod cycle, +len) is
    /// free, does not cross the cycle boundary, and p + len <= deadline_end.
    std::optional<TimeMs> find(TimeMs rel, TimeMs deadline_end, TimeMs len) const {
        if (len > cycle) return std::nullopt;
        const TimeMs scan_limit = deadline_end == kNoDeadline ? rel + 2 * cycle : deadline_end;
        TimeMs p = rel;
        while (true) {
            if (deadline_end != kNoDeadline) {
                if (p + len > deadline_end) return std::nullopt;
            } else if (p >= scan_limit) {
                return std::nullopt;
            }
            const TimeMs pm = p % cycle;
            if (pm + len > cycle) {
                p += cycle - pm;
                continue;
            }
            const Interval* c = first_conflict(pm, pm + len);
            if (c == nullptr) return p;
            p += c->end - pm;
        }
    }
};

struct SlotRequest {
    TaskId task;
    int rep;
    TimeMs rel_off;  // release offset relative to the job phase
    TimeMs dl_off;   // window-end offset relative to the job phase
    TimeMs len;
};

/// One job's slot requests on one aggregator: floor(C / D) repetitions of
/// each task, windows anchored at the job phase, tasks in push order.
std::vector<SlotRequest> job_requests(const JobProfile& profile, const AggregatorState& agg) {
    std::vector<SlotRequest> reqs;
    const auto tasks = agg.tasks_of(profile.job_id);
    if (tasks.empty() || agg.cycle_ms <= 0) return reqs;
    const TimeMs cycle = agg.cycle_ms;
    const std::int64_t reps = cycle / profile.iter_duration_ms;  // floor(C / D) >= 1

    std::map<TaskId, TimeMs> offsets;
    for (std::size_t i = 0; i < profile.tasks.size(); ++i) {
        offsets[profile.tasks[i].task_id] = profile.ready_offset(i);
    }
    std::vector<const AggTask*> ordered(tasks.begin(), tasks.end());
    std::sort(ordered.begin(), ordered.end(), [&](const AggTask* a, const AggTask* b) {
        const TimeMs oa = offsets.at(a->task_id);
        const TimeMs ob = offsets.at(b->task_id);
        return oa != ob ? oa < ob : a->task_id < b->task_id;
    });
    for (std::int64_t r = 0; r < reps; ++r) {
        const TimeMs window_start = Rational(r * cycle, reps).ceil();
        const TimeMs window_end = Rational((r + 1) * cycle, reps).floor();
        for (const auto* t : ordered) {
            reqs.push_back({t->task_id, static_cast<int>(r),
                            window_start + offsets.at(t->task_id), window_end,
                            t->exec_time_ms});
        }
    }
    return reqs;
}

/// Tries one phase: places every request with windows enforced.
bool try_phase(TimeMs phase, const JobId& job, const std::vector<SlotRequest>& reqs,
               BusySet& busy, std::vector<SlotEntry>& slots) {
    BusySet trial = busy;
    std::vector<SlotEntry> placed;
    for (const auto& q : reqs) {
        auto pos = trial.find(phase + q.rel_off, phase + q.dl_off, q.len);
        if (!pos) return false;
        const TimeMs start = *pos % trial.cycle;
        trial.add(start, start + q.len);
        placed.push_back({job, q.task, q.rep, start, q.len});
    }
    busy = std::move(trial);
    slots.insert(slots.end(), placed.begin(), placed.end());
    return true;
}

/// Fallback: keep releases, drop window ends, allow serving with lag by
/// wrapping past the cycle boundary. In resilient mode a slot that still
/// has no room ignores its release, and as a last resort is dropped
/// entirely (the engine serves such requests from leftover gaps).
bool place_relaxed(const JobId& job, const std::vector<SlotRequest>& reqs, BusySet& busy,
                   std::vector<SlotEntry>& slots, PlacementEffort effort) {
    for (const auto& q : reqs) {
        auto pos = busy.find(q.rel_off, kNoDeadline, q.len);
        if (!pos && effort == PlacementEffort::resilient) {
            pos = busy.find(0, kNoDeadline, q.len);
            if (!pos) continue;  // drop this repetition
        }
        if (!pos) return false;
        const TimeMs start = *pos % busy.cycle;
        busy.add(start, start + q.len);
        slots.push_back({job, q.task, q.rep, start, q.len});
    }
    return true;
}

std::vector<TimeMs> phase_candidates(const std::vector<SlotRequest>& reqs, const BusySet& busy) {
    std::set<TimeMs> cands;
    cands.insert(0);
    constexpr std::size_t kMaxCandidates = 128;
    std::vector<TimeMs> edges;
    edges.push_back(0);
    for (const auto& iv : busy.ivs) edges.push_back(iv.end % busy.cycle);
    for (TimeMs e : edges) {
        cands.insert(e % busy.cycle);
        for (const auto& q : reqs) {
            TimeMs c = (e - q.rel_off) % busy.cycle;
            if (c < 0) c += busy.cycle;
            cands.insert(c);
            if (cands.size() >= kMaxCandidates) return {cands.begin(), cands.end()};
        }
    }
    return {cands.begin(), cands.end()};
}

/// Rebuilds one aggregator. Placement is a pure function of the assigned
/// set, the profiles and the job order, so re-deriving an aggregator's
/// schedule from scratch reproduces the stored one.
bool rebuild_one(AggregatorState& agg, const std::map<JobId, JobProfile>& profiles,
                 const std::vector<JobId>& job_order, PlacementEffort effort) {
    TimeMs cycle = 0;
    std::set<JobId> jobs;
    for (const auto& [job, tasks] : agg.assigned) {
        auto it = profiles.find(job);
        if (it == profiles.end()) throw std::invalid_argument("missing profile for job " + job);
        cycle = std::max(cycle, it->second.iter_duration_ms);
        if (!tasks.empty()) jobs.insert(job);
    }
    agg.cycle_ms = cycle;
    agg.slot_schedule.clear();
    if (jobs.empty()) return true;

    std::vector<JobId> ordered;
    for (const JobId& job : job_order) {
        if (jobs.erase(job) != 0) ordered.push_back(job);
    }
    ordered.insert(ordered.end(), jobs.begin(), jobs.end());

    BusySet busy{cycle, {}};
    std::vector<SlotEntry> slots;
    for (const JobId& job : ordered) {
        const auto reqs = job_requests(profiles.at(job), agg);
        bool done = false;
        for (TimeMs phase : phase_candidates(reqs, busy)) {
            if (try_phase(phase, job, reqs, busy, slots)) {
                done = true;
                break;
            }
        }
        if (!done && !place_relaxed(job, reqs, busy, slots, effort)) return false;
    }
    std::sort(slots.begin(), slots.end(), [](const SlotEntry& a, const SlotEntry& b) {
        if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
        if (a.job_id != b.job_id) return a.job_id < b.job_id;
        return a.task_id < b.task_id;
    });
    agg.slot_schedule = std::move(slots);
    return true;
}

}  // namespace

std::vector<SlotEntry> build_slot_schedule(const AggregatorState& agg,
                                           const std::map<JobId, JobProfile>& profiles) {
    AggregatorState copy = agg;
    if (!rebuild_one(copy, profiles, {}, PlacementEffort::strict)) {
        throw std::runtime_error("slot schedule infeasible for aggregator " +
                                 std::to_string(agg.agg_id));
    }
    return copy.slot_schedule;
}

bool rebuild_schedules(std::map<AggId, AggregatorState>& aggs,
                       const std::map<JobId, JobProfile>& profiles,
                       const std::vector<JobId>& job_order, PlacementEffort effort) {
    for (auto& [agg_id, agg] : aggs) {
        if (!rebuild_one(agg, profiles, job_order, effort)) return false;
    }
    return true;
}

bool rebuild_schedule(AggregatorState& agg, const std::map<JobId, JobProfile>& profiles,
                      const std::vector<JobId>& job_order, PlacementEffort effort) {
    return rebuild_one(agg, profiles, job_order, effort);
}

}  // namespace psim
