#include "psim/synth.hpp"

#include <algorithm>
#include <cmath>

namespace psim::synth {

Rng::Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ULL : seed) {}

std::uint64_t Rng::next_u64() {
    // xorshift64*
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
}

double Rng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
}

double Rng::next_exponential(double rate) {
    double u = next_uniform();
    if (u >= 1.0) u = 0.9999999999;
    return -std::log(1.0 - u) / rate;
}

double Rng::next_lognormal(double mu, double sigma) {
    // Box-Muller, one draw per call.
    double u1 = next_uniform();
    double u2 = next_uniform();
    if (u1 <= 0.0) u1 = 1e-12;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    return std::exp(mu + sigma * z);
}

std::int64_t Rng::next_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(next_u64() % span);
}

namespace {

JobProfile make_model(const std::string& id, TimeMs iter_ms, int servers, int workers,
                      int num_tasks, TimeMs exec_ms, std::int64_t size_bytes,
                      TimeMs first_offset, TimeMs offset_step) {
    JobProfile p;
    p.job_id = id;
    p.iter_duration_ms = iter_ms;
    p.required_servers = servers;
    p.num_workers = workers;
    for (int i = 0; i < num_tasks; ++i) {
        AggTask t;
        t.task_id = "t" + std::to_string(i);
        t.job_id = id;
        t.exec_time_ms = exec_ms;
        t.size_bytes = size_bytes;
        p.tasks.push_back(std::move(t));
        p.tensor_ready_offsets_ms.push_back(first_offset + i * offset_step);
    }
    p.validate();
    return p;
}

}  // namespace

std::map<std::string, JobProfile> bundled_model_profiles() {
    std::map<std::string, JobProfile> models;
    auto add = [&](JobProfile p) { models.emplace(p.job_id, std::move(p)); };
    // Fast iterations, small tensors, one server.
    add(make_model("cnn-small", 400, 1, 2, 2, 30, 8'000'000, 120, 60));
    // Mid-size CNN shapes.
    add(make_model("cnn-mid", 1000, 2, 2, 2, 150, 60'000'000, 400, 150));
    add(make_model("cnn-wide", 1000, 2, 2, 4, 110, 40'000'000, 250, 120));
    // Long-iteration language models.
    add(make_model("rnn-lm", 2000, 2, 4, 4, 180, 90'000'000, 700, 220));
    add(make_model("xformer-base", 4000, 4, 4, 8, 360, 110'000'000, 900, 320));
    add(make_model("xformer-large", 8000, 8, 8, 8, 700, 220'000'000, 1500, 650));
    // Heavy aggregation relative to iteration length; packs poorly.
    add(make_model("dense-heavy", 1000, 2, 2, 4, 200, 80'000'000, 50, 200));
    return models;
}

std::vector<io::TraceRecord> generate_trace(const TraceParams& params,
                                            const std::map<std::string, JobProfile>& models) {
    std::vector<std::string> ids;
    for (const auto& [id, m] : models) ids.push_back(id);
    std::sort(ids.begin(), ids.end());

    Rng rng(params.seed);
    std::vector<io::TraceRecord> out;
    double clock_s = 0.0;
    for (int i = 0; i < params.num_jobs; ++i) {
        clock_s += rng.next_exponential(params.arrival_rate_per_s);
        const std::string& model = ids[static_cast<std::size_t>(
            rng.next_int(0, static_cast<std::int64_t>(ids.size()) - 1))];
        const JobProfile& m = models.at(model);
        double dur_s = rng.next_lognormal(params.duration_lognorm_mu, params.duration_lognorm_sigma);
        TimeMs dur_ms = static_cast<TimeMs>(dur_s * 1000.0);
        dur_ms = std::clamp(dur_ms, params.min_duration_ms, params.max_duration_ms);
        io::TraceRecord r;
        r.job_id = "job-" + std::to_string(i);
        r.submit_time_ms = static_cast<TimeMs>(clock_s * 1000.0);
        r.duration_ms = dur_ms;
        r.required_servers = m.required_servers;
        r.num_workers = m.num_workers;
        r.model_profile_id = model;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace psim::synth
