#include "psim/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace psim::sim {

namespace {

/// Integer step function over time, integrable exactly.
struct StepSeries {
    // (time, new_value) changes, time-ordered.
    std::vector<std::pair<TimeMs, std::int64_t>> changes;
    std::int64_t value = 0;

    void step(TimeMs t, std::int64_t delta) {
        value += delta;
        changes.emplace_back(t, value);
    }

    /// Integral over [a, b) and the final number of distinct values.
    std::int64_t integrate(TimeMs a, TimeMs b) const {
        std::int64_t area = 0;
        std::int64_t cur = 0;
        TimeMs t = a;
        for (const auto& [ct, v] : changes) {
            if (ct >= b) break;
            if (ct > t) area += cur * (ct - t);
            if (ct >= a) t = std::max(t, ct);
            cur = v;
            if (ct < a) t = a;
        }
        if (b > t) area += cur * (b - t);
        return area;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

MetricsReport collect_metrics(std::span<const LogRecord> records, TimeMs interval_ms) {
    MetricsReport report;
    StepSeries allocated;
    StepSeries required;
    std::map<JobId, TimeMs> job_profiled;
    struct Window {
        Rational mean{0};
        bool probation = false;
    };
    std::map<JobId, Window> last_window;
    std::map<JobId, Window> steady_window;  // last window after the final reassignment

    TimeMs end = 0;
    for (const auto& r : records) {
        end = std::max(end, r.time_ms);
        if (r.kind == "JobArrive") {
            ++report.jobs_arrived;
            job_profiled[*r.field("job")] = r.int_field("iter_ms");
            required.step(r.time_ms, r.int_field("required_servers"));
        } else if (r.kind == "JobExit") {
            ++report.jobs_finished;
            required.step(r.time_ms, -r.int_field("required_servers"));
        } else if (r.kind == "alloc_agg") {
            allocated.step(r.time_ms, 1);
            report.peak_allocated =
                std::max<int>(report.peak_allocated, static_cast<int>(allocated.value));
        } else if (r.kind == "release_agg") {
            allocated.step(r.time_ms, -1);
        } else if (r.kind == "MonitorTick") {
            Window w;
            w.mean = Rational(r.int_field("mean_num"), r.int_field("mean_den"));
            w.probation = r.int_field("probation") != 0;
            const JobId job = *r.field("job");
            last_window[job] = w;
            if (!w.probation) steady_window[job] = w;
        } else if (r.kind == "MigrationMsg" && *r.field("msg") == "complete") {
            ++report.migrations_completed;
            report.migration_stalls_ms.push_back(r.int_field("stall_ms"));
        } else if (r.kind == "SimEnd") {
            end = std::max(end, r.time_ms);
        }
    }
    report.end_ms = end;
    std::sort(report.migration_stalls_ms.begin(), report.migration_stalls_ms.end());

    report.cpu_time_allocated = allocated.integrate(0, end);
    report.cpu_time_required = required.integrate(0, end);
    report.cpu_time_saving =
        report.cpu_time_required == 0
            ? 0.0
            : 1.0 - static_cast<double>(report.cpu_time_allocated) /
                        static_cast<double>(report.cpu_time_required);

    int below_one = 0;
    int with_ratio = 0;
    for (TimeMs start = 0; start < end; start += interval_ms) {
        const TimeMs stop = std::min<TimeMs>(start + interval_ms, end);
        IntervalRow row;
        row.start_ms = start;
        const TimeMs span = stop - start;
        row.allocated_avg = static_cast<double>(allocated.integrate(start, stop)) /
                            static_cast<double>(span);
        row.required_avg = static_cast<double>(required.integrate(start, stop)) /
                           static_cast<double>(span);
        if (row.required_avg > 0) {
            row.has_ratio = true;
            row.ratio = row.allocated_avg / row.required_avg;
            ++with_ratio;
            if (row.ratio < 1.0) ++below_one;
        }
        report.intervals.push_back(row);
    }
    report.ratio_below_one_share =
        with_ratio == 0 ? 0.0 : static_cast<double>(below_one) / static_cast<double>(with_ratio);

    for (const auto& [job, w] : last_window) {
        const TimeMs d = job_profiled.count(job) ? job_profiled.at(job) : 0;
        if (d <= 0 || w.mean.num() <= 0) continue;
        report.normalized_perf[job] = (Rational(d) / w.mean).to_double();
    }
    for (const auto& [job, w] : steady_window) {
        const TimeMs d = job_profiled.count(job) ? job_profiled.at(job) : 0;
        if (d <= 0 || w.mean.num() <= 0) continue;
        report.steady_perf[job] = (Rational(d) / w.mean).to_double();
    }
    return report;
}

void write_interval_csv(std::ostream& os, const MetricsReport& report) {
    os << "interval_start_s,allocated_aggs,required_servers,ratio\n";
    for (const auto& row : report.intervals) {
        os << fmt(static_cast<double>(row.start_ms) / 1000.0) << "," << fmt(row.allocated_avg)
           << "," << fmt(row.required_avg) << ",";
        if (row.has_ratio) os << fmt(row.ratio);
        os << "\n";
    }
}

void write_summary(std::ostream& os, const MetricsReport& report) {
    os << "simulated_ms " << report.end_ms << "\n";
    os << "jobs_arrived " << report.jobs_arrived << "\n";
    os << "jobs_finished " << report.jobs_finished << "\n";
    os << "peak_allocated_aggs " << report.peak_allocated << "\n";
    os << "cpu_time_allocated_agg_ms " << report.cpu_time_allocated << "\n";
    os << "cpu_time_required_server_ms " << report.cpu_time_required << "\n";
    os << "cpu_time_saving " << fmt(report.cpu_time_saving) << "\n";
    os << "intervals_ratio_below_one " << fmt(report.ratio_below_one_share) << "\n";
    os << "migrations_completed " << report.migrations_completed << "\n";
    if (!report.migration_stalls_ms.empty()) {
        const auto& s = report.migration_stalls_ms;
        os << "migration_stall_p50_ms " << s[s.size() / 2] << "\n";
        os << "migration_stall_max_ms " << s.back() << "\n";
    }
    for (const auto& [job, perf] : report.normalized_perf) {
        os << "job_perf " << job << " " << fmt(perf) << "\n";
    }
}

}  // namespace psim::sim
