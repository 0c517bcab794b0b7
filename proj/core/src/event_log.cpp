#include "psim/event_log.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace psim::sim {

LogRecord& LogRecord::with(std::string key, std::string value) {
    fields.emplace_back(std::move(key), std::move(value));
    return *this;
}

LogRecord& LogRecord::with(std::string key, std::int64_t value) {
    fields.emplace_back(std::move(key), std::to_string(value));
    return *this;
}

const std::string* LogRecord::field(const std::string& key) const {
    for (const auto& [k, v] : fields) {
        if (k == key) return &v;
    }
    return nullptr;
}

std::int64_t LogRecord::int_field(const std::string& key) const {
    const std::string* v = field(key);
    if (v == nullptr) throw std::out_of_range("log record missing field " + key);
    return std::stoll(*v);
}

std::string LogRecord::to_jsonl() const {
    nlohmann::ordered_json j;
    j["time_ms"] = time_ms;
    j["seq"] = seq;
    j["kind"] = kind;
    for (const auto& [k, v] : fields) j[k] = v;
    return j.dump();
}

LogRecord LogRecord::from_jsonl(const std::string& line) {
    const auto j = nlohmann::ordered_json::parse(line);
    LogRecord r;
    r.time_ms = j.at("time_ms").get<TimeMs>();
    r.seq = j.at("seq").get<std::uint64_t>();
    r.kind = j.at("kind").get<std::string>();
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "time_ms" || it.key() == "seq" || it.key() == "kind") continue;
        r.fields.emplace_back(it.key(), it.value().get<std::string>());
    }
    return r;
}

void StreamSink::write(const LogRecord& record) {
    if (static_cast<int>(record.level) > static_cast<int>(max_level_)) return;
    os_ << record.to_jsonl() << "\n";
}

void VectorSink::write(const LogRecord& record) {
    if (static_cast<int>(record.level) > static_cast<int>(max_level_)) return;
    records_.push_back(record);
}

void TeeSink::write(const LogRecord& record) {
    if (a_ != nullptr) a_->write(record);
    if (b_ != nullptr) b_->write(record);
}

std::vector<LogRecord> parse_event_log(std::istream& in) {
    std::vector<LogRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(LogRecord::from_jsonl(line));
    }
    return out;
}

}  // namespace psim::sim
