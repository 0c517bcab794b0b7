#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "psim/event_log.hpp"

namespace psim::sim {

struct IntervalRow {
    TimeMs start_ms = 0;
    double allocated_avg = 0;  // time-weighted aggregator count
    double required_avg = 0;   // time-weighted sum of running jobs' server requirements
    bool has_ratio = false;    // required_avg > 0
    double ratio = 0;

    bool operator==(const IntervalRow&) const = default;
};

/// Everything the evaluation layer reports, computed purely from the event
/// log so a replayed log reproduces the report exactly.
struct MetricsReport {
    TimeMs end_ms = 0;
    std::vector<IntervalRow> intervals;
    std::int64_t cpu_time_allocated = 0;  // integral of allocated count, agg*ms
    std::int64_t cpu_time_required = 0;   // integral of required servers, server*ms
    double cpu_time_saving = 0;           // 1 - allocated/required
    double ratio_below_one_share = 0;     // share of intervals with ratio < 1
    int peak_allocated = 0;
    int jobs_arrived = 0;
    int jobs_finished = 0;
    int migrations_completed = 0;
    std::vector<TimeMs> migration_stalls_ms;       // sorted ascending
    std::map<JobId, double> normalized_perf;       // profiled / measured, last window
    std::map<JobId, double> steady_perf;           // best window after last reassignment

    bool operator==(const MetricsReport&) const = default;
};

/// Builds the report from an event stream (live or parsed back from disk).
MetricsReport collect_metrics(std::span<const LogRecord> records, TimeMs interval_ms);

void write_interval_csv(std::ostream& os, const MetricsReport& report);
void write_summary(std::ostream& os, const MetricsReport& report);

}  // namespace psim::sim
