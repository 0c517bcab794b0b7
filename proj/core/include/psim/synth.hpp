#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "psim/io.hpp"

namespace psim::synth {

/// Deterministic generator state (xorshift based, platform independent).
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    std::uint64_t next_u64();
    double next_uniform();                 // [0, 1)
    double next_exponential(double rate);  // mean 1/rate
    double next_lognormal(double mu, double sigma);
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);  // inclusive

private:
    std::uint64_t state_;
};

/// The bundled model line-up: a spread of iteration durations, aggregation
/// footprints and server requirements in {1, 2, 4, 8}.
std::map<std::string, JobProfile> bundled_model_profiles();

struct TraceParams {
    int num_jobs = 200;
    double arrival_rate_per_s = 0.9;   // Poisson arrival process
    double duration_lognorm_mu = 6.3;  // log of seconds
    double duration_lognorm_sigma = 0.9;
    TimeMs min_duration_ms = 60'000;
    TimeMs max_duration_ms = 3'600'000;
    std::uint64_t seed = 42;
};

/// Synthetic job trace over the bundled models: Poisson arrivals and
/// log-normal durations.
std::vector<io::TraceRecord> generate_trace(const TraceParams& params,
                                            const std::map<std::string, JobProfile>& models);

}  // namespace psim::synth
