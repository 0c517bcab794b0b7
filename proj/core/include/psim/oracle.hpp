#pragma once

#include <map>
#include <string>
#include <vector>

#include "psim/domain.hpp"

namespace psim::oracle {

/// A small instance of the task-to-aggregator assignment problem, solvable
/// by exhaustive enumeration.
struct ExactInstance {
    std::vector<JobProfile> jobs;
    int num_aggs = 1;
};

struct ExactSolution {
    Assignment assignment;
    Rational max_loss{0};
    bool feasible = false;
};

/// Metrics of a concrete assignment under the cyclic model: per-aggregator
/// cycles and total work, per-job effective durations (slowest hosting
/// aggregator) and losses.
struct AssignmentMetrics {
    std::map<AggId, TimeMs> cycles;
    std::map<AggId, std::int64_t> work;       // W_n
    std::map<JobId, Rational> durations;      // d_j
    std::map<JobId, Rational> losses;         // L_j
    Rational max_loss{0};
    bool overloaded = false;                  // any W_n > C_n
};

AssignmentMetrics assignment_metrics(const Assignment& assignment,
                                     const std::vector<JobProfile>& jobs);

/// Exhaustive minimizer of the maximal per-job loss subject to
/// single-placement and per-cycle load constraints. Ties break to the
/// lexicographically smallest assignment vector (tasks in canonical order,
/// aggregator indices ascending). Throws std::invalid_argument when the
/// instance exceeds the enumeration guard (num_aggs^tasks > 1e7).
ExactSolution solve_exact(const ExactInstance& inst);

struct Violation {
    enum class Kind { placement_count, overload };
    Kind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool valid() const { return violations.empty(); }
};

/// Checks the two structural constraints: every task on exactly one
/// aggregator, and no aggregator loaded past its cycle.
ValidationReport validate_assignment(const Assignment& assignment,
                                     const std::vector<JobProfile>& jobs,
                                     const std::vector<AggId>& aggs);

}  // namespace psim::oracle
