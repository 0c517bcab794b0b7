#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "psim/migration.hpp"

using namespace psim;
using namespace psim::migration;

TEST_CASE("initiating a session twice for one tensor conflicts") {
    SessionRegistry reg;
    reg.initiate({"J", "t0"}, 1, 2);
    CHECK_THROWS_AS(reg.initiate({"J", "t0"}, 1, 3), SessionConflict);
    CHECK_NOTHROW(reg.initiate({"J", "t1"}, 1, 2));  // other tensors independent
}

TEST_CASE("a migration onto the same aggregator is rejected") {
    SessionRegistry reg;
    CHECK_THROWS_AS(reg.initiate({"J", "t0"}, 3, 3), std::invalid_argument);
}

TEST_CASE("redirect processing is idempotent") {
    SessionRegistry reg;
    auto& s = reg.initiate({"J", "t0"}, 1, 2);
    reg.on_init_received(s);
    reg.on_agent_redirect(s, "agent-0");
    reg.on_agent_redirect(s, "agent-0");
    reg.on_agent_redirect(s, "agent-0");
    CHECK(s.agents_updated.size() == 1);
}

TEST_CASE("completion requires both notifications, in either order") {
    auto run = [](bool copy_first) {
        SessionRegistry reg;
        auto& s = reg.initiate({"J", "t0"}, 1, 2);
        reg.on_init_received(s);
        reg.on_pull_response(s, "agent-0", 2);
        reg.on_pull_response(s, "agent-1", 2);
        CHECK(s.phase == Phase::InfoPropagated);
        s.phase = Phase::Copying;
        if (copy_first) {
            reg.on_copy_arrived(s);
            CHECK(s.phase == Phase::CopyDone);
            reg.on_copy_done_notified(s);
            CHECK(s.phase == Phase::AwaitWorkerDone);
            CHECK(s.phase != Phase::Complete);
            reg.on_push_at_destination(s);
            reg.on_worker_done_notified(s);
        } else {
            reg.on_push_at_destination(s);
            reg.on_worker_done_notified(s);
            CHECK(s.phase != Phase::Complete);  // updates still deferred
            CHECK_FALSE(can_execute_update_at_destination(s));
            reg.on_copy_arrived(s);
            reg.on_copy_done_notified(s);
        }
        CHECK(s.phase == Phase::Complete);
        CHECK_NOTHROW(reg.retire({"J", "t0"}));
    };
    run(true);
    run(false);
}

TEST_CASE("worker_done cannot be notified before a push arrived") {
    SessionRegistry reg;
    auto& s = reg.initiate({"J", "t0"}, 1, 2);
    reg.on_init_received(s);
    CHECK_THROWS_AS(reg.on_worker_done_notified(s), std::logic_error);
}

TEST_CASE("stall measurement") {
    CHECK(measure_stall(1004, 1050) == 0);  // copy inside the idle window
    CHECK(measure_stall(1060, 1050) == 10);
    CHECK(measure_stall(0, 0) == 0);
}

TEST_CASE("copy transfer time at line rate plus overhead") {
    // 12.5 MB per ms at 100 Gbps.
    CHECK(copy_transfer_ms(12'500'000, 100.0, 0) == 1);
    CHECK(copy_transfer_ms(170'000'000, 100.0, 2) == 16);  // ceil(13.6) + 2
    CHECK(copy_transfer_ms(0, 100.0, 2) == 2);
    CHECK_THROWS_AS(copy_transfer_ms(1, 0.0, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Exhaustive interleaving check: shared model, see migration_model.hpp.
// ---------------------------------------------------------------------------

#include "migration_model.hpp"

TEST_CASE("exhaustive interleavings preserve migration safety") {
    auto ex = psim::test::migration_model::run_plain();
    CHECK_MESSAGE(ex.ok(), ex.violation);
    CHECK(ex.states > 100);
    CHECK(ex.terminals > 0);
    MESSAGE("explored " << ex.states << " states, " << ex.terminals << " terminal");
}

TEST_CASE("a straggler push in flight to the source is forwarded, not executed") {
    auto ex = psim::test::migration_model::run_straggler();
    CHECK_MESSAGE(ex.ok(), ex.violation);
    CHECK(ex.states > 100);
    CHECK(ex.terminals > 0);
}
