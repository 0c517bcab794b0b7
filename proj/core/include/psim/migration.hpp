#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "psim/domain.hpp"

namespace psim::migration {

/// Protocol message kinds, in causal order per session.
enum class MsgKind {
    MIGRATE_INIT,
    PULL_RESPONSE_WITH_REDIRECT,
    TENSOR_COPY,
    TENSOR_COPY_DONE,
    WORKER_DONE,
};
const char* to_string(MsgKind kind);

enum class Phase {
    Init,            // session created, MIGRATE_INIT in flight
    AwaitPull,       // source holds redirect info, waiting for the next pulls
    InfoPropagated,  // every worker's pull response carried the redirect
    Copying,         // tensor payload in flight to the destination
    CopyDone,        // payload arrived; destination may execute updates
    AwaitWorkerDone, // master copy settled, waiting for the first redirected push
    Complete,
};
const char* to_string(Phase phase);

struct TensorRef {
    JobId job_id;
    TaskId task_id;
    auto operator<=>(const TensorRef&) const = default;
};

struct MigrationMessage {
    MsgKind kind;
    std::uint64_t session_id = 0;
    TensorRef tensor;
    std::int64_t payload_bytes = 0;  // TENSOR_COPY only
};

/// One tensor's move between aggregators. Transitions are driven by the
/// event engine (simulated deliveries) or by a model-checking harness; every
/// transition validates its precondition.
struct MigrationSession {
    std::uint64_t session_id = 0;
    TensorRef tensor;
    AggId from_agg = 0;
    AggId to_agg = 0;
    Phase phase = Phase::Init;
    std::set<std::string> agents_updated;
    bool copy_done_seen = false;    // pMaster saw TENSOR_COPY_DONE
    bool copy_arrived = false;      // payload landed at the destination
    bool worker_done_seen = false;  // pMaster saw WORKER_DONE
    bool worker_push_arrived = false;
    TimeMs stall_ms = 0;
};

struct SessionConflict : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Owns active sessions, at most one per tensor.
class SessionRegistry {
public:
    /// Creates a session and conceptually dispatches MIGRATE_INIT to the
    /// source. Throws SessionConflict when the tensor is already migrating
    /// and std::invalid_argument when from == to.
    MigrationSession& initiate(const TensorRef& tensor, AggId from, AggId to);

    MigrationSession* find(const TensorRef& tensor);
    const MigrationSession* find(const TensorRef& tensor) const;
    MigrationSession* find_by_id(std::uint64_t session_id);

    /// Source received MIGRATE_INIT and now waits for the next pulls.
    void on_init_received(MigrationSession& s);
    /// One worker's pull was answered with the redirect embedded.
    void on_pull_response(MigrationSession& s, const std::string& agent_id, int num_workers);
    /// An agent processed the redirect; idempotent.
    void on_agent_redirect(MigrationSession& s, const std::string& agent_id);
    /// The payload finished arriving at the destination.
    void on_copy_arrived(MigrationSession& s);
    /// pMaster received TENSOR_COPY_DONE.
    void on_copy_done_notified(MigrationSession& s);
    /// First push for the tensor arrived at the destination.
    void on_push_at_destination(MigrationSession& s);
    /// pMaster received WORKER_DONE.
    void on_worker_done_notified(MigrationSession& s);

    /// Removes a completed session; returns the final record.
    MigrationSession retire(const TensorRef& tensor);

    std::size_t active_count() const { return sessions_.size(); }
    const std::map<TensorRef, MigrationSession>& sessions() const { return sessions_; }

private:
    void maybe_complete(MigrationSession& s);

    std::map<TensorRef, MigrationSession> sessions_;
    std::uint64_t next_session_id_ = 1;
};

/// Updates for a migrating tensor may execute at the destination only once
/// the master copy has fully arrived.
inline bool can_execute_update_at_destination(const MigrationSession& s) {
    return s.copy_arrived;
}

/// Worker-visible delay of a migration: how long past the moment the tensor
/// was next needed the copy kept it unavailable.
TimeMs measure_stall(TimeMs copy_finish_ms, TimeMs needed_at_ms);

/// Payload transfer time at a given bandwidth plus the fixed per-tensor
/// serialization overhead.
TimeMs copy_transfer_ms(std::int64_t size_bytes, double bandwidth_gbps, TimeMs overhead_ms);

}  // namespace psim::migration
