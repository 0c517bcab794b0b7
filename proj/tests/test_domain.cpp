#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "psim/domain.hpp"
#include "psim/placement.hpp"

using namespace psim;
using namespace psim::test;

TEST_CASE("compute_cycle picks the largest iteration duration") {
    auto j1 = make_job("J1", 6, {2}, {0});
    auto j2 = make_job("J2", 12, {3}, {0});
    std::vector<JobProfile> one{j1};
    std::vector<JobProfile> both{j1, j2};
    CHECK(compute_cycle(std::span<const JobProfile>(one)) == 6);
    CHECK(compute_cycle(std::span<const JobProfile>(both)) == 12);
    CHECK(compute_cycle(std::span<const JobProfile>{}) == 0);

    // Permutation invariance.
    std::vector<JobProfile> flipped{j2, j1};
    CHECK(compute_cycle(std::span<const JobProfile>(flipped)) == 12);
}

TEST_CASE("effective_iteration follows the cycle arithmetic") {
    CHECK(effective_iteration(6, 12) == Rational(6));
    CHECK(effective_iteration(5, 12) == Rational(6));
    CHECK(effective_iteration(12, 12) == Rational(12));
    CHECK(effective_iteration(7, 12) == Rational(12));
    CHECK_THROWS_AS(effective_iteration(12, 6), std::invalid_argument);
    CHECK_THROWS_AS(effective_iteration(0, 6), std::invalid_argument);
}

TEST_CASE("effective_iteration properties") {
    TestRng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const TimeMs d = rng.range(1, 500);
        const TimeMs c = d + rng.range(0, 2000);
        const Rational eff = effective_iteration(d, c);
        CHECK(eff >= Rational(d));
        if (c % d == 0) CHECK(eff == Rational(d));
    }
}

TEST_CASE("perf_loss matches the worked example") {
    CHECK(perf_loss(5, 6) == Rational(1, 6));
    CHECK(perf_loss(12, 12) == Rational(0));
    CHECK(perf_loss(6, 6) == Rational(0));
    CHECK_THROWS_AS(perf_loss(6, 5), std::invalid_argument);
}

TEST_CASE("perf_loss is monotone in the current duration") {
    TestRng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const TimeMs d = rng.range(1, 200);
        const TimeMs a = d + rng.range(0, 300);
        const TimeMs b = a + rng.range(0, 300);
        CHECK(perf_loss(d, a) <= perf_loss(d, b));
    }
}

TEST_CASE("free_slots on the two-job sharing example") {
    auto j1 = make_job("J1", 6, {2}, {0});
    auto j2 = make_job("J2", 12, {3}, {0});
    auto agg = make_agg(1, {j1, j2});
    std::map<JobId, Rational> iters{{"J1", Rational(6)}, {"J2", Rational(12)}};
    CHECK(free_slots(agg, 12, iters) == 12 - (2 * 2 + 1 * 3));

    auto solo = make_agg(2, {j1});
    std::map<JobId, Rational> solo_iters{{"J1", Rational(6)}};
    CHECK(free_slots(solo, 6, solo_iters) == 4);

    AggregatorState empty;
    CHECK(free_slots(empty, 0, {}) == 0);
}

TEST_CASE("free_slots flags overload as a negative value") {
    auto heavy = make_job("H", 10, {8, 8}, {0, 1}, 2);
    auto agg = make_agg(1, {heavy});
    std::map<JobId, Rational> iters{{"H", Rational(10)}};
    CHECK(free_slots(agg, 10, iters) < 0);
}

TEST_CASE("slot schedule reproduces the two-job cycle") {
    auto j1 = make_job("J1", 6, {2});  // default offsets
    auto j2 = make_job("J2", 12, {3});
    auto agg = make_agg(1, {j1, j2});
    agg.cycle_ms = 12;
    auto slots = build_slot_schedule(agg, profile_map({j1, j2}));

    int j1_slots = 0, j2_slots = 0;
    for (const auto& s : slots) {
        if (s.job_id == "J1") {
            ++j1_slots;
            CHECK(s.duration_ms == 2);
        } else {
            ++j2_slots;
            CHECK(s.duration_ms == 3);
        }
        CHECK(s.start_ms >= 0);
        CHECK(s.start_ms + s.duration_ms <= 12);
    }
    CHECK(j1_slots == 2);  // runs twice per cycle
    CHECK(j2_slots == 1);
    CHECK(!slots_overlap(slots));

    // Accounting: free slots equal cycle minus total scheduled time.
    TimeMs scheduled = 0;
    for (const auto& s : slots) scheduled += s.duration_ms;
    CHECK(12 - scheduled == 5);
}

TEST_CASE("single task spanning the whole cycle") {
    auto j = make_job("J", 10, {10}, {0}, 1, 1);
    auto agg = make_agg(1, {j});
    auto slots = build_slot_schedule(agg, profile_map({j}));
    REQUIRE(slots.size() == 1);
    CHECK(slots[0].start_ms == 0);
    CHECK(slots[0].duration_ms == 10);
}

TEST_CASE("three unit tasks pack without overlap") {
    auto j = make_job("J", 5, {1, 1, 1}, {0, 1, 2}, 1, 1);
    auto agg = make_agg(1, {j});
    auto slots = build_slot_schedule(agg, profile_map({j}));
    REQUIRE(slots.size() == 3);
    CHECK(!slots_overlap(slots));
    for (const auto& s : slots) {
        CHECK(s.start_ms >= 0);
        CHECK(s.start_ms + s.duration_ms <= 5);
    }
}

TEST_CASE("schedule accounting holds over random instances") {
    TestRng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        // Jobs with divisor-friendly durations so they share one aggregator.
        const TimeMs base = 12 * rng.range(1, 4);
        std::vector<JobProfile> jobs;
        const int njobs = static_cast<int>(rng.range(1, 3));
        TimeMs budget = base;
        for (int i = 0; i < njobs; ++i) {
            const TimeMs d = base / (1 << rng.range(0, 1));
            const int ntasks = static_cast<int>(rng.range(1, 2));
            std::vector<TimeMs> execs, offsets;
            for (int t = 0; t < ntasks; ++t) {
                const TimeMs reps = base / d;
                const TimeMs e = std::max<TimeMs>(1, std::min(budget / (2 * reps), rng.range(1, 6)));
                if (budget - e * reps < 0) break;
                budget -= e * reps;
                execs.push_back(e);
                offsets.push_back(rng.range(0, d / 2));
            }
            if (execs.empty()) continue;
            jobs.push_back(make_job("J" + std::to_string(i), d, execs, offsets));
        }
        if (jobs.empty()) continue;
        auto agg = make_agg(1, jobs);
        std::vector<SlotEntry> slots;
        try {
            slots = build_slot_schedule(agg, profile_map(jobs));
        } catch (const std::runtime_error&) {
            continue;  // fragmentation can make an instance unplaceable
        }
        CHECK(!slots_overlap(slots));
        TimeMs cycle = 0;
        for (const auto& j : jobs) cycle = std::max(cycle, j.iter_duration_ms);
        TimeMs scheduled = 0;
        for (const auto& s : slots) scheduled += s.duration_ms;
        std::map<JobId, Rational> iters;
        for (const auto& j : jobs) iters.emplace(j.job_id, effective_iteration(j.iter_duration_ms, cycle));
        auto agg2 = make_agg(1, jobs);
        CHECK(free_slots(agg2, cycle, iters) == cycle - scheduled);
    }
}

TEST_CASE("rebuilding from scratch reproduces stored schedules") {
    auto j1 = make_job("J1", 6, {2});
    auto j2 = make_job("J2", 12, {3});
    std::map<AggId, AggregatorState> aggs;
    aggs.emplace(1, make_agg(1, {j1, j2}));
    REQUIRE(rebuild_schedules(aggs, profile_map({j1, j2})));
    const auto snapshot_cycle = aggs.at(1).cycle_ms;
    const auto snapshot_slots = aggs.at(1).slot_schedule;

    std::map<AggId, AggregatorState> again;
    again.emplace(1, make_agg(1, {j1, j2}));
    REQUIRE(rebuild_schedules(again, profile_map({j1, j2})));
    CHECK(again.at(1).cycle_ms == snapshot_cycle);
    REQUIRE(again.at(1).slot_schedule.size() == snapshot_slots.size());
    for (std::size_t i = 0; i < snapshot_slots.size(); ++i) {
        CHECK(again.at(1).slot_schedule[i].start_ms == snapshot_slots[i].start_ms);
        CHECK(again.at(1).slot_schedule[i].task_id == snapshot_slots[i].task_id);
    }
}

TEST_CASE("profile validation rejects broken invariants") {
    auto ok = make_job("J", 100, {10, 10}, {10, 20});
    CHECK_NOTHROW(ok.validate());

    auto zero_iter = ok;
    zero_iter.iter_duration_ms = 0;
    CHECK_THROWS_AS(zero_iter.validate(), std::invalid_argument);

    auto over_budget = make_job("J", 100, {90, 90, 90}, {0, 0, 0}, 2);
    CHECK_THROWS_AS(over_budget.validate(), std::invalid_argument);

    auto bad_offset = make_job("J", 100, {10}, {100});
    CHECK_THROWS_AS(bad_offset.validate(), std::invalid_argument);

    auto dup = ok;
    dup.tasks[1].task_id = dup.tasks[0].task_id;
    CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
}

TEST_CASE("default ready offsets spread across the back half") {
    auto offs = default_ready_offsets(1000, 4);
    REQUIRE(offs.size() == 4);
    CHECK(offs[0] == 500);
    for (std::size_t i = 0; i < offs.size(); ++i) {
        CHECK(offs[i] >= 500);
        CHECK(offs[i] < 1000);
        if (i > 0) CHECK(offs[i] > offs[i - 1]);
    }
}
