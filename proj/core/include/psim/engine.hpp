#pragma once

#include <map>
#include <memory>
#include <vector>

#include "psim/assignment.hpp"
#include "psim/event_log.hpp"
#include "psim/io.hpp"
#include "psim/metrics.hpp"
#include "psim/migration.hpp"
#include "psim/scaling.hpp"

namespace psim::sim {

/// Network interference against one aggregator: transfers to and from it
/// slow down by an integer factor for the window.
struct InterferenceSpec {
    AggId target_agg = 0;
    TimeMs start_ms = 0;
    TimeMs end_ms = 0;
    std::int64_t slowdown_factor = 1;
};

/// A transient straggler: one worker's pushes in one iteration arrive late.
struct StragglerInjection {
    JobId job_id;
    int worker = 0;
    std::int64_t at_iteration = 0;
    TimeMs delay_ms = 0;
};

struct SimOptions {
    io::RunConfig config;
    std::vector<InterferenceSpec> interference;
    std::vector<StragglerInjection> stragglers;
    bool allow_new_aggs = true;        // false: mitigation may not allocate
    bool record_completions = false;   // retain per-job completion times
    RecordLevel log_detail = RecordLevel::info;
};

struct JobStatsOut {
    std::vector<TimeMs> completions;  // when record_completions
    std::int64_t iterations = 0;
    Rational last_window_mean{0};
    int reverts = 0;
    std::vector<AggId> final_aggs;
};

struct SimResult {
    MetricsReport metrics;
    TimeMs end_time_ms = 0;
    std::uint64_t events_processed = 0;
    std::map<JobId, JobStatsOut> jobs;
};

/// Runs the whole simulation; deterministic given identical inputs.
/// Records stream to `sink` (optional) and feed the metrics report.
SimResult run_simulation(const std::vector<io::TraceRecord>& trace,
                         const std::map<std::string, JobProfile>& models, const SimOptions& opts,
                         LogSink* sink = nullptr);

/// One point of a job's normalized-performance timeline.
struct PerfPoint {
    TimeMs time_ms = 0;
    JobId job_id;
    double normalized_perf = 0;
};

/// Convenience wrapper for interference studies: run the trace with the
/// given interference and allocation policy, return the per-job performance
/// timeline (one point per monitoring window).
std::vector<PerfPoint> run_interference_scenario(const std::vector<io::TraceRecord>& trace,
                                                 const std::map<std::string, JobProfile>& models,
                                                 SimOptions opts,
                                                 std::vector<InterferenceSpec> interference,
                                                 bool allow_new_aggs,
                                                 SimResult* result_out = nullptr);

// ---------------------------------------------------------------------------
// Late-request rule (exposed for direct testing)
// ---------------------------------------------------------------------------

struct Obstacle {
    TimeMs start = 0;
    TimeMs end = 0;
};

struct LateDecision {
    bool execute_now = false;
    TimeMs at_ms = 0;  // execution start, or the postponed slot time
};

/// A request that missed its slot executes immediately when a contiguous
/// free gap fits it before the current cycle ends, after reserving every
/// remaining scheduled slot; otherwise it waits for the task's next slot.
LateDecision handle_late_request(std::vector<Obstacle> obstacles, TimeMs cycle_end_ms,
                                 TimeMs ready_ms, TimeMs exec_ms, TimeMs next_instance_ms);

}  // namespace psim::sim
