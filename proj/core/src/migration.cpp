#include "psim/migration.hpp"

#include <algorithm>

namespace psim::migration {

const char* to_string(MsgKind kind) {
    switch (kind) {
        case MsgKind::MIGRATE_INIT: return "MIGRATE_INIT";
        case MsgKind::PULL_RESPONSE_WITH_REDIRECT: return "PULL_RESPONSE_WITH_REDIRECT";
        case MsgKind::TENSOR_COPY: return "TENSOR_COPY";
        case MsgKind::TENSOR_COPY_DONE: return "TENSOR_COPY_DONE";
        case MsgKind::WORKER_DONE: return "WORKER_DONE";
    }
    return "?";
}

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::Init: return "Init";
        case Phase::AwaitPull: return "AwaitPull";
        case Phase::InfoPropagated: return "InfoPropagated";
        case Phase::Copying: return "Copying";
        case Phase::CopyDone: return "CopyDone";
        case Phase::AwaitWorkerDone: return "AwaitWorkerDone";
        case Phase::Complete: return "Complete";
    }
    return "?";
}

MigrationSession& SessionRegistry::initiate(const TensorRef& tensor, AggId from, AggId to) {
    if (from == to) {
        throw std::invalid_argument("migration with identical source and destination");
    }
    if (sessions_.contains(tensor)) {
        throw SessionConflict("tensor " + tensor.job_id + "/" + tensor.task_id +
                              " already migrating");
    }
    MigrationSession s;
    s.session_id = next_session_id_++;
    s.tensor = tensor;
    s.from_agg = from;
    s.to_agg = to;
    s.phase = Phase::Init;
    auto [it, ok] = sessions_.emplace(tensor, std::move(s));
    return it->second;
}

MigrationSession* SessionRegistry::find(const TensorRef& tensor) {
    auto it = sessions_.find(tensor);
    return it == sessions_.end() ? nullptr : &it->second;
}

const MigrationSession* SessionRegistry::find(const TensorRef& tensor) const {
    auto it = sessions_.find(tensor);
    return it == sessions_.end() ? nullptr : &it->second;
}

MigrationSession* SessionRegistry::find_by_id(std::uint64_t session_id) {
    for (auto& [ref, s] : sessions_) {
        if (s.session_id == session_id) return &s;
    }
    return nullptr;
}

void SessionRegistry::on_init_received(MigrationSession& s) {
    if (s.phase != Phase::Init) {
        throw std::logic_error("MIGRATE_INIT delivered twice for session " +
                               std::to_string(s.session_id));
    }
    s.phase = Phase::AwaitPull;
}

void SessionRegistry::on_pull_response(MigrationSession& s, const std::string& agent_id,
                                       int num_workers) {
    // Straggler pulls may arrive after the copy started; the redirect is
    // still embedded, but the copy is not restarted.
    if (s.phase == Phase::Init) {
        throw std::logic_error("pull response before MIGRATE_INIT delivery");
    }
    s.agents_updated.insert(agent_id);  // response carries the redirect
    if (s.phase == Phase::AwaitPull &&
        s.agents_updated.size() >= static_cast<std::size_t>(num_workers)) {
        s.phase = Phase::InfoPropagated;
    }
}

void SessionRegistry::on_agent_redirect(MigrationSession& s, const std::string& agent_id) {
    s.agents_updated.insert(agent_id);  // idempotent
}

void SessionRegistry::on_copy_arrived(MigrationSession& s) {
    if (s.copy_arrived) throw std::logic_error("tensor copy delivered twice");
    s.copy_arrived = true;
    if (s.phase == Phase::InfoPropagated || s.phase == Phase::Copying ||
        s.phase == Phase::AwaitPull) {
        s.phase = Phase::CopyDone;
    }
}

void SessionRegistry::on_copy_done_notified(MigrationSession& s) {
    if (!s.copy_arrived) {
        throw std::logic_error("TENSOR_COPY_DONE before the copy arrived");
    }
    if (s.copy_done_seen) throw std::logic_error("TENSOR_COPY_DONE delivered twice");
    s.copy_done_seen = true;
    maybe_complete(s);
    if (s.phase != Phase::Complete) s.phase = Phase::AwaitWorkerDone;
}

void SessionRegistry::on_push_at_destination(MigrationSession& s) {
    s.worker_push_arrived = true;
}

void SessionRegistry::on_worker_done_notified(MigrationSession& s) {
    if (!s.worker_push_arrived) {
        throw std::logic_error("WORKER_DONE before any push reached the destination");
    }
    if (s.worker_done_seen) throw std::logic_error("WORKER_DONE delivered twice");
    s.worker_done_seen = true;
    maybe_complete(s);
}

void SessionRegistry::maybe_complete(MigrationSession& s) {
    if (s.copy_done_seen && s.worker_done_seen) s.phase = Phase::Complete;
}

MigrationSession SessionRegistry::retire(const TensorRef& tensor) {
    auto it = sessions_.find(tensor);
    if (it == sessions_.end()) throw std::logic_error("no session for tensor");
    if (it->second.phase != Phase::Complete) {
        throw std::logic_error("retiring incomplete session");
    }
    MigrationSession out = it->second;
    sessions_.erase(it);
    return out;
}

TimeMs measure_stall(TimeMs copy_finish_ms, TimeMs needed_at_ms) {
    return std::max<TimeMs>(0, copy_finish_ms - needed_at_ms);
}

TimeMs copy_transfer_ms(std::int64_t size_bytes, double bandwidth_gbps, TimeMs overhead_ms) {
    if (size_bytes < 0) throw std::invalid_argument("negative payload size");
    if (bandwidth_gbps <= 0) throw std::invalid_argument("bandwidth must be positive");
    const std::int64_t bytes_per_ms = static_cast<std::int64_t>(bandwidth_gbps * 125000.0);
    if (bytes_per_ms <= 0) throw std::invalid_argument("bandwidth too small");
    const std::int64_t transfer = (size_bytes + bytes_per_ms - 1) / bytes_per_ms;
    return transfer + overhead_ms;
}

}  // namespace psim::migration
