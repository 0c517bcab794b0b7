#include "psim/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace psim::io {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, const std::string& path, int lineno) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
}

TimeMs seconds_to_ms(double seconds) {
    return static_cast<TimeMs>(std::llround(seconds * 1000.0));
}

Rational fraction_field(const json& j, const char* key, Rational fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string()) return rational_from_decimal(v.get<std::string>());
    // Numeric JSON values are re-rendered through a short decimal literal so
    // thresholds stay exact (0.1 becomes 1/10, not a binary double).
    std::ostringstream os;
    os.precision(9);
    os << std::fixed << v.get<double>();
    return rational_from_decimal(os.str());
}

}  // namespace

void RunConfig::validate() const {
    if (monitor_iterations < 1) throw std::invalid_argument("monitor_iterations must be >= 1");
    if (scaling_period_ms <= 0) throw std::invalid_argument("scaling_period_s must be positive");
    if (bandwidth_gbps <= 0) throw std::invalid_argument("bandwidth_gbps must be positive");
    if (per_message_overhead_ms < 0) {
        throw std::invalid_argument("per_message_overhead_ms must be >= 0");
    }
    if (interval_ms <= 0) throw std::invalid_argument("interval_s must be positive");
    if (clusters_initial < 1) throw std::invalid_argument("clusters_initial must be >= 1");
    if (ondemand_threshold < 1) throw std::invalid_argument("ondemand_threshold must be >= 1");
    if (max_aggs_per_cluster < 1) throw std::invalid_argument("max_aggs_per_cluster must be >= 1");
    if (!(Rational(0) < loss_limit && loss_limit < Rational(1))) {
        throw std::invalid_argument("loss_limit must be in (0, 1)");
    }
}

std::map<std::string, JobProfile> parse_profiles(std::istream& in, const std::string& path) {
    std::map<std::string, JobProfile> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_line(line, path, lineno);
        JobProfile p;
        try {
            p.job_id = j.at("job_id").get<std::string>();
            p.iter_duration_ms = j.at("iter_duration_ms").get<TimeMs>();
            p.required_servers = j.at("required_servers").get<int>();
            p.num_workers = j.at("num_workers").get<int>();
            bool any_offset = false;
            for (const auto& tj : j.at("tasks")) {
                AggTask t;
                t.task_id = tj.at("task_id").get<std::string>();
                t.job_id = p.job_id;
                t.exec_time_ms = tj.at("exec_time_ms").get<TimeMs>();
                t.size_bytes = tj.at("size_bytes").get<std::int64_t>();
                p.tasks.push_back(std::move(t));
                if (tj.contains("ready_offset_ms")) any_offset = true;
            }
            if (any_offset) {
                const auto defaults = default_ready_offsets(p.iter_duration_ms, p.tasks.size());
                std::size_t i = 0;
                for (const auto& tj : j.at("tasks")) {
                    p.tensor_ready_offsets_ms.push_back(
                        tj.contains("ready_offset_ms") ? tj.at("ready_offset_ms").get<TimeMs>()
                                                       : defaults[i]);
                    ++i;
                }
            }
        } catch (const json::exception& e) {
            throw ParseError(path, lineno, std::string("bad profile: ") + e.what());
        }
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            throw ParseError(path, lineno, e.what());
        }
        if (!out.emplace(p.job_id, std::move(p)).second) {
            throw ParseError(path, lineno, "duplicate profile id");
        }
    }
    return out;
}

std::map<std::string, JobProfile> load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return parse_profiles(in, path);
}

std::string profile_to_jsonl(const JobProfile& profile) {
    nlohmann::ordered_json j;
    j["job_id"] = profile.job_id;
    j["iter_duration_ms"] = profile.iter_duration_ms;
    j["required_servers"] = profile.required_servers;
    j["num_workers"] = profile.num_workers;
    j["tasks"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < profile.tasks.size(); ++i) {
        const auto& t = profile.tasks[i];
        nlohmann::ordered_json tj;
        tj["task_id"] = t.task_id;
        tj["exec_time_ms"] = t.exec_time_ms;
        tj["size_bytes"] = t.size_bytes;
        if (!profile.tensor_ready_offsets_ms.empty()) {
            tj["ready_offset_ms"] = profile.tensor_ready_offsets_ms[i];
        }
        j["tasks"].push_back(std::move(tj));
    }
    return j.dump();
}

std::vector<TraceRecord> parse_trace(std::istream& in, const std::string& path) {
    std::vector<TraceRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_line(line, path, lineno);
        TraceRecord r;
        try {
            r.job_id = j.at("job_id").get<std::string>();
            r.submit_time_ms = seconds_to_ms(j.at("submit_time_s").get<double>());
            r.duration_ms = seconds_to_ms(j.at("duration_s").get<double>());
            r.required_servers = j.at("required_servers").get<int>();
            r.num_workers = j.at("num_workers").get<int>();
            r.model_profile_id = j.at("model_profile_id").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError(path, lineno, std::string("bad trace record: ") + e.what());
        }
        if (r.submit_time_ms < 0) throw ParseError(path, lineno, "submit_time_s must be >= 0");
        if (r.duration_ms <= 0) throw ParseError(path, lineno, "duration_s must be positive");
        if (r.required_servers < 1) throw ParseError(path, lineno, "required_servers must be >= 1");
        if (r.num_workers < 1) throw ParseError(path, lineno, "num_workers must be >= 1");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<TraceRecord> load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return parse_trace(in, path);
}

std::string trace_to_jsonl(const TraceRecord& record) {
    nlohmann::ordered_json j;
    j["job_id"] = record.job_id;
    j["submit_time_s"] = static_cast<double>(record.submit_time_ms) / 1000.0;
    j["duration_s"] = static_cast<double>(record.duration_ms) / 1000.0;
    j["required_servers"] = record.required_servers;
    j["num_workers"] = record.num_workers;
    j["model_profile_id"] = record.model_profile_id;
    return j.dump();
}

RunConfig parse_config(std::istream& in, const std::string& path) {
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = buf.str().empty() ? json::object() : json::parse(buf.str());
    } catch (const json::exception& e) {
        throw ParseError(path, 1, std::string("invalid JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        cfg.loss_limit = fraction_field(j, "loss_limit", cfg.loss_limit);
        if (j.contains("monitor_iterations")) cfg.monitor_iterations = j.at("monitor_iterations").get<int>();
        if (j.contains("scaling_period_s")) cfg.scaling_period_ms = seconds_to_ms(j.at("scaling_period_s").get<double>());
        if (j.contains("bandwidth_gbps")) cfg.bandwidth_gbps = j.at("bandwidth_gbps").get<double>();
        if (j.contains("per_message_overhead_ms")) cfg.per_message_overhead_ms = j.at("per_message_overhead_ms").get<TimeMs>();
        if (j.contains("interval_s")) cfg.interval_ms = seconds_to_ms(j.at("interval_s").get<double>());
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("clusters_initial")) cfg.clusters_initial = j.at("clusters_initial").get<int>();
        if (j.contains("ondemand_threshold")) cfg.ondemand_threshold = j.at("ondemand_threshold").get<int>();
        if (j.contains("max_aggs_per_cluster")) cfg.max_aggs_per_cluster = j.at("max_aggs_per_cluster").get<int>();
    } catch (const json::exception& e) {
        throw ParseError(path, 1, std::string("bad config: ") + e.what());
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(path, 1, e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return parse_config(in, path);
}

void validate_trace(const std::vector<TraceRecord>& trace,
                    const std::map<std::string, JobProfile>& models, const std::string& path) {
    int lineno = 0;
    for (const auto& r : trace) {
        ++lineno;
        auto it = models.find(r.model_profile_id);
        if (it == models.end()) {
            throw ParseError(path, lineno, "unknown model_profile_id " + r.model_profile_id);
        }
        JobProfile p = instantiate_profile(r, it->second);
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            throw ParseError(path, lineno, e.what());
        }
    }
}

JobProfile instantiate_profile(const TraceRecord& record, const JobProfile& model) {
    JobProfile p = model;
    p.job_id = record.job_id;
    p.required_servers = record.required_servers;
    p.num_workers = record.num_workers;
    for (auto& t : p.tasks) t.job_id = record.job_id;
    return p;
}

}  // namespace psim::io
