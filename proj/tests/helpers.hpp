#pragma once

#include <map>
#include <string>
#include <vector>

#include "psim/assignment.hpp"
#include "psim/domain.hpp"

namespace psim::test {

/// Job profile with uniform task exec times and explicit offsets.
inline JobProfile make_job(const JobId& id, TimeMs iter_ms, std::vector<TimeMs> exec_times,
                           std::vector<TimeMs> offsets = {}, int required = 2, int workers = 2,
                           std::int64_t size_bytes = 4'000'000) {
    JobProfile p;
    p.job_id = id;
    p.iter_duration_ms = iter_ms;
    p.required_servers = required;
    p.num_workers = workers;
    for (std::size_t i = 0; i < exec_times.size(); ++i) {
        AggTask t;
        t.task_id = "t" + std::to_string(i);
        t.job_id = id;
        t.exec_time_ms = exec_times[i];
        t.size_bytes = size_bytes;
        p.tasks.push_back(std::move(t));
    }
    p.tensor_ready_offsets_ms = std::move(offsets);
    return p;
}

inline std::map<JobId, JobProfile> profile_map(const std::vector<JobProfile>& jobs) {
    std::map<JobId, JobProfile> m;
    for (const auto& j : jobs) m.emplace(j.job_id, j);
    return m;
}

/// Aggregator hosting every task of the given jobs, cycle left at 0 until a
/// schedule rebuild sets it.
inline AggregatorState make_agg(AggId id, const std::vector<JobProfile>& jobs) {
    AggregatorState agg;
    agg.agg_id = id;
    for (const auto& j : jobs) {
        for (const auto& t : j.tasks) agg.assigned[j.job_id].push_back(t);
    }
    return agg;
}

inline bool slots_overlap(const std::vector<SlotEntry>& slots) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
        for (std::size_t j = i + 1; j < slots.size(); ++j) {
            const TimeMs a0 = slots[i].start_ms, a1 = a0 + slots[i].duration_ms;
            const TimeMs b0 = slots[j].start_ms, b1 = b0 + slots[j].duration_ms;
            if (a0 < b1 && b0 < a1) return true;
        }
    }
    return false;
}

/// Deterministic pseudo-random stream for property tests.
class TestRng {
public:
    explicit TestRng(std::uint64_t seed) : s_(seed * 2654435761u + 1) {}
    std::uint64_t next() {
        s_ ^= s_ >> 12;
        s_ ^= s_ << 25;
        s_ ^= s_ >> 27;
        return s_ * 0x2545F4914F6CDD1DULL;
    }
    std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::uint64_t s_;
};

}  // namespace psim::test
