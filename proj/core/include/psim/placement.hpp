#pragma once

#include <map>
#include <optional>
#include <vector>

#include "psim/domain.hpp"

namespace psim {

/// Slot placement for cyclic schedules.
///
/// Every job hosted by an aggregator receives floor(C / d_j) repetitions of
/// each of its tasks per cycle. The placement tries to anchor each job at a
/// phase so that every slot falls inside its repetition window
/// [phase + rep * d + ready_offset, phase + (rep + 1) * d]: a job whose slots
/// all fit inside their windows runs at exactly its effective iteration
/// duration once it locks onto the schedule. When no phase works the slots
/// fall back to earliest-feasible placement past their ready offsets, which
/// keeps the schedule valid but may cost the job real performance; the
/// measured-feedback path is responsible for catching that.
///
/// Placement is a pure function of (assignment, profiles): rebuilding from
/// scratch reproduces stored schedules exactly.

/// Builds the slot schedule of a single aggregator viewed in isolation
/// (every hosted job's effective duration computed against this cycle).
/// Throws std::runtime_error when slots cannot be placed without overlap.
std::vector<SlotEntry> build_slot_schedule(const AggregatorState& agg,
                                           const std::map<JobId, JobProfile>& profiles);

/// strict: every repetition must be placed past its ready offset, or the
/// rebuild fails. resilient: placement degrades instead of failing — ready
/// offsets are dropped first, then surplus repetitions; jobs whose slots
/// degraded run late and pay for it in measured performance.
enum class PlacementEffort { strict, resilient };

/// Recomputes cycles and slot schedules for a set of aggregators that share
/// jobs. Effective durations honor the slowest hosting aggregator of each
/// job. Jobs are placed in `job_order` (first-assignment order, so
/// incumbents keep their claim on the timeline); jobs not listed follow in
/// ascending id order. Returns false when some slot cannot be placed
/// (states untouched in that case are not guaranteed; callers treat false
/// as "reject this configuration").
bool rebuild_schedules(std::map<AggId, AggregatorState>& aggs,
                       const std::map<JobId, JobProfile>& profiles,
                       const std::vector<JobId>& job_order = {},
                       PlacementEffort effort = PlacementEffort::strict);

/// Rebuilds a single aggregator; placement depends only on its own tenant
/// set, so this is equivalent to the full rebuild restricted to one entry.
bool rebuild_schedule(AggregatorState& agg, const std::map<JobId, JobProfile>& profiles,
                      const std::vector<JobId>& job_order = {},
                      PlacementEffort effort = PlacementEffort::strict);

}  // namespace psim
