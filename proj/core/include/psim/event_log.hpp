#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "psim/domain.hpp"

namespace psim::sim {

enum class RecordLevel { info = 0, debug = 1 };

/// One line of the simulation event log. Field values are pre-rendered
/// strings so that emitting, parsing and re-emitting is bit-exact.
struct LogRecord {
    TimeMs time_ms = 0;
    std::uint64_t seq = 0;
    std::string kind;
    std::vector<std::pair<std::string, std::string>> fields;
    RecordLevel level = RecordLevel::info;

    LogRecord& with(std::string key, std::string value);
    LogRecord& with(std::string key, std::int64_t value);
    const std::string* field(const std::string& key) const;
    std::int64_t int_field(const std::string& key) const;

    std::string to_jsonl() const;
    static LogRecord from_jsonl(const std::string& line);
};

struct LogSink {
    virtual ~LogSink() = default;
    virtual void write(const LogRecord& record) = 0;
};

class StreamSink : public LogSink {
public:
    explicit StreamSink(std::ostream& os, RecordLevel max_level = RecordLevel::debug)
        : os_(os), max_level_(max_level) {}
    void write(const LogRecord& record) override;

private:
    std::ostream& os_;
    RecordLevel max_level_;
};

class VectorSink : public LogSink {
public:
    explicit VectorSink(RecordLevel max_level = RecordLevel::debug) : max_level_(max_level) {}
    void write(const LogRecord& record) override;
    const std::vector<LogRecord>& records() const { return records_; }

private:
    std::vector<LogRecord> records_;
    RecordLevel max_level_;
};

class TeeSink : public LogSink {
public:
    TeeSink(LogSink* a, LogSink* b) : a_(a), b_(b) {}
    void write(const LogRecord& record) override;

private:
    LogSink* a_;
    LogSink* b_;
};

/// Parses a whole event log (one JSON object per line).
std::vector<LogRecord> parse_event_log(std::istream& in);

}  // namespace psim::sim
