#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "psim/domain.hpp"

namespace psim::io {

/// Input error with the offending file and line.
struct ParseError : std::runtime_error {
    ParseError(std::string path_, int line_, const std::string& what_)
        : std::runtime_error(path_ + ":" + std::to_string(line_) + ": " + what_),
          path(std::move(path_)),
          line(line_) {}
    std::string path;
    int line;
};

/// One job submission from a trace file.
struct TraceRecord {
    JobId job_id;
    TimeMs submit_time_ms = 0;
    TimeMs duration_ms = 0;
    int required_servers = 1;
    int num_workers = 1;
    std::string model_profile_id;
};

/// Simulation configuration with the documented defaults.
struct RunConfig {
    Rational loss_limit{1, 10};
    int monitor_iterations = 100;
    TimeMs scaling_period_ms = 60'000;
    double bandwidth_gbps = 100.0;
    TimeMs per_message_overhead_ms = 2;
    TimeMs interval_ms = 60'000;
    std::uint64_t seed = 1;
    int clusters_initial = 1;
    // Scaling extras (optional in the config file).
    int ondemand_threshold = 1;
    int max_aggs_per_cluster = 64;

    void validate() const;
};

/// Model profile files are JSON lines, one profile object per line:
/// {"job_id":..., "iter_duration_ms":..., "required_servers":...,
///  "num_workers":..., "tasks":[{"task_id":...,"exec_time_ms":...,
///  "size_bytes":..., "ready_offset_ms":...}]}
/// ready_offset_ms is optional; omitted offsets use the default spread.
std::map<std::string, JobProfile> load_profiles(const std::string& path);
std::map<std::string, JobProfile> parse_profiles(std::istream& in, const std::string& path);
std::string profile_to_jsonl(const JobProfile& profile);

/// Trace files are JSON lines: {"job_id":..., "submit_time_s":...,
/// "duration_s":..., "required_servers":..., "num_workers":...,
/// "model_profile_id":...}
std::vector<TraceRecord> load_trace(const std::string& path);
std::vector<TraceRecord> parse_trace(std::istream& in, const std::string& path);
std::string trace_to_jsonl(const TraceRecord& record);

/// Config files are a single JSON object; all keys optional.
RunConfig load_config(const std::string& path);
RunConfig parse_config(std::istream& in, const std::string& path);

/// Cross-checks a trace against its model profiles: every model id resolves
/// and the per-record server count keeps the job feasible. Throws ParseError
/// with the offending line.
void validate_trace(const std::vector<TraceRecord>& trace,
                    const std::map<std::string, JobProfile>& models, const std::string& path);

/// Instantiates the model profile for one trace record (job id and server
/// counts come from the record).
JobProfile instantiate_profile(const TraceRecord& record, const JobProfile& model);

}  // namespace psim::io
