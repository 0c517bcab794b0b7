#include <stdexcept>

#include "doctest.h"
#include "helpers.hpp"
#include "psim/assignment.hpp"
#include "psim/oracle.hpp"

using namespace psim;
using namespace psim::test;
using namespace psim::oracle;

TEST_CASE("exact solver on a one-task instance") {
    ExactInstance inst;
    inst.jobs.push_back(make_job("J", 10, {2}, {0}));
    inst.num_aggs = 1;
    auto sol = solve_exact(inst);
    CHECK(sol.feasible);
    CHECK(sol.max_loss == Rational(0));
}

TEST_CASE("exact solver packs the two toy jobs at zero loss") {
    ExactInstance inst;
    inst.jobs.push_back(make_job("J1", 6, {2}, {0}));
    inst.jobs.push_back(make_job("J2", 12, {3}, {0}));
    inst.num_aggs = 1;
    auto sol = solve_exact(inst);
    CHECK(sol.feasible);
    CHECK(sol.max_loss == Rational(0));
}

TEST_CASE("exact solver reports the forced loss of a fast job") {
    ExactInstance inst;
    inst.jobs.push_back(make_job("F", 5, {1}, {0}));
    inst.jobs.push_back(make_job("S", 12, {3}, {0}));
    inst.num_aggs = 1;
    auto sol = solve_exact(inst);
    CHECK(sol.feasible);
    CHECK(sol.max_loss == Rational(1, 6));
}

TEST_CASE("enumeration guard rejects oversized instances") {
    ExactInstance inst;
    for (int i = 0; i < 6; ++i) {
        inst.jobs.push_back(make_job("j" + std::to_string(i), 100, {1, 1, 1, 1}, {0, 1, 2, 3}));
    }
    inst.num_aggs = 8;  // 8^24 combinations
    CHECK_THROWS_AS(solve_exact(inst), std::invalid_argument);
}

TEST_CASE("validator flags duplicate placement") {
    auto j = make_job("J", 10, {2}, {0});
    Assignment a;
    a.add("J", "t0", 1);
    a.add("J", "t0", 2);
    auto report = validate_assignment(a, {j}, {1, 2});
    CHECK_FALSE(report.valid());
    CHECK(report.violations[0].kind == Violation::Kind::placement_count);
}

TEST_CASE("validator flags a missing task") {
    auto j = make_job("J", 10, {2, 3}, {0, 2});
    Assignment a;
    a.add("J", "t0", 1);
    auto report = validate_assignment(a, {j}, {1});
    CHECK_FALSE(report.valid());
}

TEST_CASE("validator flags an overloaded cycle") {
    // 13 units of work per cycle of 12.
    auto j1 = make_job("A", 12, {7}, {0}, 1);
    auto j2 = make_job("B", 12, {6}, {0}, 1);
    Assignment a;
    a.add("A", "t0", 1);
    a.add("B", "t0", 1);
    auto report = validate_assignment(a, {j1, j2}, {1});
    CHECK_FALSE(report.valid());
    CHECK(report.violations[0].kind == Violation::Kind::overload);
}

TEST_CASE("metrics use the slowest hosting aggregator per job") {
    auto a = make_job("A", 5, {1, 1}, {0, 1});
    auto b = make_job("B", 12, {3}, {0});
    Assignment asg;
    asg.add("A", "t0", 1);  // shares agg 1 with the slow job
    asg.add("A", "t1", 2);  // alone on agg 2
    asg.add("B", "t0", 1);
    auto m = assignment_metrics(asg, {a, b});
    CHECK(m.cycles.at(1) == 12);
    CHECK(m.cycles.at(2) == 5);
    CHECK(m.durations.at("A") == Rational(6));  // max(6, 5)
    CHECK(m.losses.at("A") == Rational(1, 6));
    CHECK(m.max_loss == Rational(1, 6));
}

namespace {

std::vector<JobProfile> random_small_instance(TestRng& rng) {
    std::vector<JobProfile> jobs;
    const int njobs = static_cast<int>(rng.range(1, 3));
    for (int i = 0; i < njobs; ++i) {
        const TimeMs d = 5 * rng.range(1, 8);
        const int ntasks = static_cast<int>(rng.range(1, 3));
        std::vector<TimeMs> execs, offsets;
        TimeMs budget = 2 * d;
        for (int t = 0; t < ntasks; ++t) {
            TimeMs e = rng.range(1, std::max<TimeMs>(1, d / 2));
            if (e > budget) break;
            budget -= e;
            execs.push_back(e);
            offsets.push_back(0);
        }
        if (execs.empty()) continue;
        jobs.push_back(make_job("j" + std::to_string(i), d, execs, offsets, 2));
    }
    return jobs;
}

}  // namespace

TEST_CASE("the heuristic never beats the exact bound at equal size") {
    TestRng rng(301);
    AssignConfig cfg;
    int compared = 0;
    for (int trial = 0; trial < 200 && compared < 120; ++trial) {
        auto jobs = random_small_instance(rng);
        if (jobs.empty()) continue;
        auto profiles = profile_map(jobs);
        SchedulerState st;
        bool placed_all = true;
        for (const auto& j : jobs) {
            if (!assign_job(st, j, profiles, cfg)) placed_all = false;
        }
        if (!placed_all) continue;
        auto heuristic = assignment_metrics(st.assignment, jobs);

        ExactInstance inst;
        inst.jobs = jobs;
        inst.num_aggs = static_cast<int>(st.aggs.size());
        std::size_t tasks = 0;
        for (const auto& j : jobs) tasks += j.tasks.size();
        double combos = 1;
        for (std::size_t i = 0; i < tasks; ++i) combos *= inst.num_aggs;
        if (combos > 1e6) continue;
        auto sol = solve_exact(inst);
        REQUIRE(sol.feasible);  // the heuristic's own assignment is feasible
        CHECK(sol.max_loss <= heuristic.max_loss);
        ++compared;
    }
    CHECK(compared >= 100);
}

TEST_CASE("exact solver is deterministic including ties") {
    ExactInstance inst;
    inst.jobs.push_back(make_job("A", 10, {2}, {0}));
    inst.jobs.push_back(make_job("B", 10, {2}, {0}));
    inst.num_aggs = 2;
    auto s1 = solve_exact(inst);
    auto s2 = solve_exact(inst);
    CHECK(s1.assignment == s2.assignment);
    CHECK(s1.max_loss == s2.max_loss);
    // Lexicographically smallest vector: everything on aggregator 1.
    for (const auto& e : s1.assignment.entries) CHECK(e.agg_id == 1);
}
