#include "psim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <queue>
#include <set>
#include <stdexcept>

#include "psim/log.hpp"
#include "psim/placement.hpp"

namespace psim::sim {

LateDecision handle_late_request(std::vector<Obstacle> obstacles, TimeMs cycle_end_ms,
                                 TimeMs ready_ms, TimeMs exec_ms, TimeMs next_instance_ms) {
    std::sort(obstacles.begin(), obstacles.end(),
              [](const Obstacle& a, const Obstacle& b) { return a.start < b.start; });
    TimeMs g = ready_ms;
    for (const auto& ob : obstacles) {
        if (ob.end <= g) continue;
        if (ob.start >= g + exec_ms) break;
        g = ob.end;
    }
    if (g + exec_ms <= cycle_end_ms) return {true, g};
    return {false, next_instance_ms};
}

namespace {

enum class EvKind {
    JobArrive,
    IterationDone,
    PushDepart,
    PushArrive,
    TaskReady,
    ExecStart,
    ExecEnd,
    PartDone,
    CopyArrive,
    ScaleTick,
    InterferenceStart,
    InterferenceEnd,
};

struct Event {
    TimeMs t = 0;
    std::uint64_t seq = 0;
    EvKind kind{};
    JobId job;
    int task = -1;
    int worker = -1;
    AggId agg = 0;
    ClusterId cluster = 0;
    std::uint64_t session = 0;
    std::int64_t iter = -1;
    std::size_t index = 0;  // trace / spec index
};

struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        return a.seq > b.seq;
    }
};

struct TaskPattern {
    std::vector<TimeMs> positions;  // slot starts within [0, cycle), sorted
    TimeMs dur = 0;
};

struct AggRt {
    ClusterId cluster = 0;
    TimeMs cycle = 0;
    std::map<std::pair<JobId, TaskId>, TaskPattern> patterns;
    std::map<TimeMs, TimeMs> committed;  // execution start -> end
    TimeMs ingress_busy = 0;
    TimeMs egress_busy = 0;
    std::int64_t slowdown = 1;
    TimeMs last_slowdown_seen = -1;
    int drain_sessions = 0;  // outbound migrations pending before release
};

struct TaskRt {
    AggTask spec;
    TimeMs offset = 0;
    std::vector<AggId> agent_table;  // per worker
    // At most one outstanding aggregation request per task.
    bool pending = false;
    TimeMs ready_at = 0;
    TimeMs mark = 0;  // slot instances at or before this are spent
    int pushes_outstanding = 0;
    TimeMs last_push_ms = 0;
};

struct JobRt {
    JobProfile profile;
    ClusterId cluster = 0;
    TimeMs submit_ms = 0;
    TimeMs duration_ms = 0;
    bool active = false;
    std::int64_t iter = -1;
    TimeMs iter_start = 0;
    int parts_outstanding = 0;
    TimeMs last_part_ms = 0;
    std::int64_t completions = 0;
    std::deque<TimeMs> history;  // recent completion times, window + 1 deep
    std::vector<TimeMs> all_completions;
    std::int64_t window_anchor_count = 0;
    TimeMs window_anchor_time = 0;
    Rational last_window_mean{0};
    bool in_probation = false;
    bool reassigning = false;
    int pending_migrations = 0;
    std::unique_ptr<scaling::ArrivalController> controller;
    std::vector<TaskRt> tasks;
    std::map<std::int64_t, std::map<int, TimeMs>> stragglers;  // iter -> worker -> delay
    int reverts = 0;
};

struct SessionRt {
    TimeMs copy_finish = -1;
    TimeMs first_deferred_ready = -1;
    // Requests that arrived at the destination before the copy landed.
    std::vector<std::pair<JobId, int>> deferred;
};

struct Cluster {
    scaling::ClusterState state;
    int peak_demand = 0;
    int blocked_requests = 0;
    std::vector<JobId> wait_queue;
    bool tick_scheduled = false;
};

class Engine {
public:
    Engine(std::vector<io::TraceRecord> trace, const std::map<std::string, JobProfile>& models,
           const SimOptions& opts, LogSink* sink)
        : trace_(std::move(trace)), models_(models), opts_(opts), sink_(sink) {
        opts_.config.validate();
        acfg_.loss_limit = opts_.config.loss_limit;
        acfg_.monitor_iterations = opts_.config.monitor_iterations;
        acfg_.low_perf_threshold = Rational(1) - opts_.config.loss_limit;
        scfg_.scaling_period_ms = opts_.config.scaling_period_ms;
        scfg_.ondemand_threshold = opts_.config.ondemand_threshold;
        scfg_.max_aggs_per_cluster = opts_.config.max_aggs_per_cluster;
        bytes_per_ms_ = static_cast<std::int64_t>(opts_.config.bandwidth_gbps * 125000.0);
        if (bytes_per_ms_ <= 0) throw std::invalid_argument("bandwidth too small");
    }

    SimResult run();

private:
    // --- plumbing -----------------------------------------------------------
    void schedule(TimeMs t, Event ev) {
        if (t < now_) throw std::logic_error("event scheduled in the past");
        ev.t = t;
        ev.seq = seq_++;
        queue_.push(std::move(ev));
    }

    LogRecord& log(std::string kind, RecordLevel level = RecordLevel::info) {
        scratch_ = LogRecord{};
        scratch_.time_ms = now_;
        scratch_.seq = log_seq_++;
        scratch_.kind = std::move(kind);
        scratch_.level = level;
        return scratch_;
    }

    void emit(const LogRecord& r) {
        if (r.level == RecordLevel::info) records_.push_back(r);
        if (sink_ != nullptr &&
            static_cast<int>(r.level) <= static_cast<int>(opts_.log_detail)) {
            sink_->write(r);
        }
    }

    std::int64_t transfer_ms(std::int64_t bytes, AggId agg) {
        AggRt& rt = agg_rt_.at(agg);
        const std::int64_t d = bytes * rt.slowdown / bytes_per_ms_;
        if (rt.slowdown > 1 && d > 0) rt.last_slowdown_seen = now_;
        return d;
    }

    Cluster& cluster_of(const JobRt& job) { return clusters_.at(job.cluster); }

    // --- world management ---------------------------------------------------
    ClusterId new_cluster();
    void sync_agg_runtime(Cluster& cl);
    void emit_new_allocations(Cluster& cl);
    AggId fresh_agg(Cluster& cl);
    void release_agg(Cluster& cl, AggId id);

    // --- arrival / exit / scaling -------------------------------------------
    void on_job_arrive(const io::TraceRecord& rec);
    bool try_place_job(const JobId& id, bool gate_allocations);
    void activate_job(const JobId& id);
    void on_job_exit(JobRt& job);
    void on_scale_tick(ClusterId cid);

    // --- iteration machinery --------------------------------------------------
    void start_iteration(JobRt& job);
    void on_push_depart(const Event& ev);
    void push_arrived(JobRt& job, int ti, int worker, TimeMs t);
    void on_task_ready(JobRt& job, int ti, TimeMs t);
    void dispatch_request(JobRt& job, int ti, TimeMs ready, AggId agg);
    void exec_start(const Event& ev);
    void exec_end(const Event& ev);
    void part_done(JobRt& job, int ti, TimeMs t);
    void iteration_done(JobRt& job);

    // --- monitoring / feedback ------------------------------------------------
    void monitor_tick(JobRt& job);
    Rational trailing_loss(const JobRt& job) const;
    void do_revert(JobRt& job, const std::set<AggId>& exclude);
    void mitigate_interference(JobRt& job, const std::set<AggId>& flagged);
    void begin_migrations(JobRt& job, const std::vector<scaling::TaskMove>& moves);

    // --- migration ------------------------------------------------------------
    AggId owner_agg(const JobRt& job, int ti) const;
    void start_copy(migration::MigrationSession& s, const JobRt& job, int ti);
    void on_copy_arrive(const Event& ev);
    void session_progress(migration::MigrationSession& s);
    void finish_session(migration::TensorRef ref);  // by value: retiring erases the session
    void abort_job_sessions(JobRt& job);

    TimeMs next_instance_after(const AggRt& rt, const JobId& job, const TaskId& task,
                               TimeMs t) const;

    // --- members ---------------------------------------------------------------
    std::vector<io::TraceRecord> trace_;
    const std::map<std::string, JobProfile>& models_;
    SimOptions opts_;
    AssignConfig acfg_;
    scaling::ScalingConfig scfg_;
    std::int64_t bytes_per_ms_ = 1;
    LogSink* sink_ = nullptr;

    TimeMs now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t log_seq_ = 0;
    std::uint64_t events_ = 0;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    LogRecord scratch_;
    std::vector<LogRecord> records_;

    std::map<ClusterId, Cluster> clusters_;
    ClusterId next_cluster_id_ = 1;
    AggId next_agg_id_ = 1;
    std::map<AggId, AggRt> agg_rt_;
    std::map<JobId, JobRt> jobs_;
    std::map<JobId, JobProfile> profiles_;

    migration::SessionRegistry sessions_;
    std::map<std::uint64_t, SessionRt> session_rt_;
    bool trace_cursor_pending_ = false;
};

// ---------------------------------------------------------------------------
// World management
// ---------------------------------------------------------------------------

ClusterId Engine::new_cluster() {
    Cluster cl;
    cl.state.cluster_id = next_cluster_id_++;
    cl.state.sched.cluster_id = cl.state.cluster_id;
    cl.state.sched.next_agg_id = next_agg_id_;
    const ClusterId cid = cl.state.cluster_id;
    clusters_.emplace(cid, std::move(cl));
    emit(log("alloc_cluster").with("cluster", static_cast<std::int64_t>(cid)));
    return cid;
}

void Engine::sync_agg_runtime(Cluster& cl) {
    for (auto& [id, agg] : cl.state.sched.aggs) {
        auto [it, inserted] = agg_rt_.try_emplace(id);
        AggRt& rt = it->second;
        rt.cluster = cl.state.cluster_id;
        rt.cycle = agg.cycle_ms;
        rt.patterns.clear();
        for (const auto& slot : agg.slot_schedule) {
            auto& pat = rt.patterns[{slot.job_id, slot.task_id}];
            pat.positions.push_back(slot.start_ms);
            pat.dur = slot.duration_ms;
        }
        for (auto& [key, pat] : rt.patterns) {
            std::sort(pat.positions.begin(), pat.positions.end());
        }
    }
}

void Engine::emit_new_allocations(Cluster& cl) {
    while (next_agg_id_ < cl.state.sched.next_agg_id) {
        emit(log("alloc_agg")
                 .with("agg", static_cast<std::int64_t>(next_agg_id_))
                 .with("cluster", static_cast<std::int64_t>(cl.state.cluster_id)));
        ++next_agg_id_;
    }
    cl.peak_demand = std::max(cl.peak_demand, cl.state.active_agg_count());
}

AggId Engine::fresh_agg(Cluster& cl) {
    cl.state.sched.next_agg_id = next_agg_id_;
    AggId id = cl.state.sched.allocate_aggregator().agg_id;
    emit_new_allocations(cl);
    sync_agg_runtime(cl);
    return id;
}

void Engine::release_agg(Cluster& cl, AggId id) {
    emit(log("release_agg")
             .with("agg", static_cast<std::int64_t>(id))
             .with("cluster", static_cast<std::int64_t>(cl.state.cluster_id)));
    cl.state.sched.aggs.erase(id);
    agg_rt_.erase(id);
}

// ---------------------------------------------------------------------------
// Arrival, exit, scaling
// ---------------------------------------------------------------------------

void Engine::on_job_arrive(const io::TraceRecord& rec) {
    const JobProfile& model = models_.at(rec.model_profile_id);
    JobProfile profile = io::instantiate_profile(rec, model);
    profile.validate();

    JobRt job;
    job.profile = profile;
    job.submit_ms = rec.submit_time_ms;
    job.duration_ms = rec.duration_ms;
    for (std::size_t i = 0; i < profile.tasks.size(); ++i) {
        TaskRt t;
        t.spec = profile.tasks[i];
        t.offset = profile.ready_offset(i);
        t.agent_table.assign(static_cast<std::size_t>(profile.num_workers), 0);
        job.tasks.push_back(std::move(t));
    }
    for (const auto& s : opts_.stragglers) {
        if (s.job_id == profile.job_id && s.delay_ms > 0) {
            job.stragglers[s.at_iteration][s.worker] = s.delay_ms;
        }
    }
    // Placement sees push arrival times, not generation times: big tensors
    // spend worker-count serialized transfers on the wire before the
    // aggregation can run, so slots must not be scheduled earlier.
    JobProfile placement_view = profile;
    placement_view.tensor_ready_offsets_ms.clear();
    for (std::size_t i = 0; i < profile.tasks.size(); ++i) {
        const TimeMs base = profile.tasks[i].size_bytes / bytes_per_ms_;
        const TimeMs shifted = profile.ready_offset(i) + profile.num_workers * base;
        placement_view.tensor_ready_offsets_ms.push_back(
            std::min(shifted, profile.iter_duration_ms - 1));
    }
    profiles_[profile.job_id] = std::move(placement_view);
    jobs_[profile.job_id] = std::move(job);

    emit(log("JobArrive")
             .with("job", profile.job_id)
             .with("model", rec.model_profile_id)
             .with("required_servers", static_cast<std::int64_t>(profile.required_servers))
             .with("num_workers", static_cast<std::int64_t>(profile.num_workers))
             .with("iter_ms", profile.iter_duration_ms));

    if (!try_place_job(profile.job_id, true)) {
        // Allocation gated below the on-demand threshold; wait for the next
        // scaling period.
        JobRt& j = jobs_.at(profile.job_id);
        clusters_.at(j.cluster).wait_queue.push_back(profile.job_id);
    }
}

bool Engine::try_place_job(const JobId& id, bool gate_allocations) {
    JobRt& job = jobs_.at(id);
    // Cluster choice: best fit by free CPU, growth fallback.
    std::vector<scaling::ClusterState*> views;
    for (auto& [cid, cl] : clusters_) views.push_back(&cl.state);
    auto choice = scaling::select_cluster(job.profile, views, profiles_);
    if (choice.needs_growth) {
        Cluster& target = clusters_.at(choice.cluster_id);
        if (target.state.active_agg_count() >= scfg_.max_aggs_per_cluster) {
            choice.cluster_id = new_cluster();
        }
    }
    job.cluster = choice.cluster_id;
    Cluster& cl = clusters_.at(choice.cluster_id);

    // First try without allocations (spare capacity and empty aggregators in
    // the cluster are ordinary candidates).
    cl.state.sched.next_agg_id = next_agg_id_;
    AssignOptions opts;
    opts.allow_alloc = false;
    auto placed = assign_job(cl.state.sched, job.profile, profiles_, acfg_, opts);
    if (!placed) {
        ++cl.blocked_requests;
        if (gate_allocations && cl.blocked_requests < scfg_.ondemand_threshold) {
            return false;
        }
        opts.allow_alloc = true;
        placed = assign_job(cl.state.sched, job.profile, profiles_, acfg_, opts);
        emit_new_allocations(cl);
        cl.blocked_requests = 0;  // the on-demand allocation met the demand
    }
    cl.state.jobs_served.insert(id);
    cl.peak_demand = std::max(cl.peak_demand, cl.state.active_agg_count());
    sync_agg_runtime(cl);
    activate_job(id);
    return true;
}

void Engine::activate_job(const JobId& id) {
    JobRt& job = jobs_.at(id);
    Cluster& cl = clusters_.at(job.cluster);
    for (std::size_t ti = 0; ti < job.tasks.size(); ++ti) {
        const AggId agg = cl.state.sched.assignment.agg_of(id, job.tasks[ti].spec.task_id);
        for (auto& entry : job.tasks[ti].agent_table) entry = agg;
        job.tasks[ti].mark = now_;
    }
    job.active = true;
    job.in_probation = true;
    job.controller = std::make_unique<scaling::ArrivalController>(
        id, job.profile.required_servers, acfg_);
    job.window_anchor_count = 0;
    job.window_anchor_time = now_;
    job.iter = -1;
    if (!cl.tick_scheduled) {
        cl.tick_scheduled = true;
        Event ev;
        ev.kind = EvKind::ScaleTick;
        ev.cluster = cl.state.cluster_id;
        schedule(now_ + scfg_.scaling_period_ms, std::move(ev));
    }
    start_iteration(job);
}

void Engine::on_job_exit(JobRt& job) {
    const JobId id = job.profile.job_id;
    emit(log("JobExit")
             .with("job", id)
             .with("required_servers", static_cast<std::int64_t>(job.profile.required_servers)));
    job.active = false;
    abort_job_sessions(job);

    Cluster& cl = clusters_.at(job.cluster);
    cl.state.jobs_served.erase(id);
    auto emptied = scaling::remove_job(cl.state.sched, id, profiles_);
    profiles_.erase(id);
    for (AggId agg : emptied) {
        if (agg_rt_.at(agg).drain_sessions == 0) release_agg(cl, agg);
    }
    sync_agg_runtime(cl);

    // Compaction: drain the least-loaded aggregators into the rest, no new
    // allocations allowed; realized through tensor migrations. Jobs with
    // tensors already in flight and mid-drain aggregators stay put.
    std::set<JobId> frozen;
    std::map<JobId, std::set<AggId>> job_excludes;
    for (const auto& [jid, j] : jobs_) {
        if (j.pending_migrations > 0 || j.in_probation) frozen.insert(jid);
        if (j.controller != nullptr) job_excludes[jid] = j.controller->excluded();
    }
    std::set<AggId> mid_drain;
    for (const auto& [aid, rt] : agg_rt_) {
        if (rt.drain_sessions > 0) mid_drain.insert(aid);
    }
    auto plan = scaling::recycle_least_loaded(cl.state.sched, profiles_, acfg_, frozen, mid_drain,
                                              job_excludes);
    if (!plan.released.empty()) {
        cl.state.sched.assignment = plan.result.assignment;
        for (auto& [aid, agg] : plan.result.aggs) {
            auto it = cl.state.sched.aggs.find(aid);
            if (it != cl.state.sched.aggs.end()) {
                it->second = agg;
                if (agg.status == AggStatus::released) {
                    it->second.status = AggStatus::draining;
                }
            }
        }
        sync_agg_runtime(cl);
        for (AggId victim : plan.released) {
            emit(log("recycle").with("agg", static_cast<std::int64_t>(victim)));
        }
        // A tensor may hop through an aggregator drained later in the same
        // plan; one session suffices, straight to the final destination.
        std::map<std::pair<JobId, TaskId>, scaling::TaskMove> composed;
        for (const auto& mv : plan.moves) {
            auto [it, inserted] = composed.try_emplace({mv.job_id, mv.task_id}, mv);
            if (!inserted) it->second.to_agg = mv.to_agg;
        }
        std::map<JobId, std::vector<scaling::TaskMove>> per_job;
        for (const auto& [key, mv] : composed) {
            if (mv.from_agg != mv.to_agg) per_job[mv.job_id].push_back(mv);
        }
        for (auto& [jid, moves] : per_job) {
            begin_migrations(jobs_.at(jid), moves);
        }
        // Drains with nothing in flight release immediately.
        for (AggId victim : plan.released) {
            auto it = cl.state.sched.aggs.find(victim);
            if (it != cl.state.sched.aggs.end() && agg_rt_.at(victim).drain_sessions == 0) {
                release_agg(cl, victim);
            }
        }
    }
}

void Engine::on_scale_tick(ClusterId cid) {
    auto cit = clusters_.find(cid);
    if (cit == clusters_.end()) return;
    Cluster& cl = cit->second;

    scaling::PeriodStats stats;
    stats.peak_demand_aggs = cl.peak_demand;
    stats.blocked_requests = cl.blocked_requests;
    auto actions = scaling::periodic_rescale(cl.state, profiles_, stats, scfg_);

    emit(log("ScalePeriodTick")
             .with("cluster", static_cast<std::int64_t>(cid))
             .with("peak", static_cast<std::int64_t>(stats.peak_demand_aggs))
             .with("blocked", static_cast<std::int64_t>(stats.blocked_requests))
             .with("released", static_cast<std::int64_t>(actions.release_empty.size()))
             .with("provisioned", static_cast<std::int64_t>(actions.provision)));

    for (AggId id : actions.release_empty) release_agg(cl, id);
    for (int i = 0; i < actions.provision; ++i) fresh_agg(cl);

    cl.blocked_requests = 0;
    cl.peak_demand = cl.state.active_agg_count();

    auto queue = std::move(cl.wait_queue);
    cl.wait_queue.clear();
    for (const JobId& id : queue) {
        if (!try_place_job(id, false)) {
            clusters_.at(jobs_.at(id).cluster).wait_queue.push_back(id);
        }
    }

    if (actions.remove_cluster && clusters_.size() > 1 && cl.wait_queue.empty() &&
        cl.state.jobs_served.empty()) {
        for (auto& [aid, agg] : std::map<AggId, AggregatorState>(cl.state.sched.aggs)) {
            release_agg(cl, aid);
        }
        emit(log("release_cluster").with("cluster", static_cast<std::int64_t>(cid)));
        clusters_.erase(cid);
        return;
    }

    const bool anything_live = !cl.state.jobs_served.empty() || !cl.wait_queue.empty() ||
                               trace_cursor_pending_;
    if (anything_live) {
        Event ev;
        ev.kind = EvKind::ScaleTick;
        ev.cluster = cid;
        schedule(now_ + scfg_.scaling_period_ms, std::move(ev));
    } else {
        cl.tick_scheduled = false;
    }
}

// ---------------------------------------------------------------------------
// Iterations
// ---------------------------------------------------------------------------

void Engine::start_iteration(JobRt& job) {
    ++job.iter;
    job.iter_start = now_;
    job.parts_outstanding = static_cast<int>(job.tasks.size());
    job.last_part_ms = now_;
    if (job.history.empty()) job.history.push_back(now_);

    auto strag_it = job.stragglers.find(job.iter);
    for (std::size_t ti = 0; ti < job.tasks.size(); ++ti) {
        TaskRt& task = job.tasks[ti];
        task.pushes_outstanding = job.profile.num_workers;
        task.last_push_ms = 0;
        const bool slow_path =
            !opts_.interference.empty() || task.spec.size_bytes >= bytes_per_ms_ ||
            sessions_.find({job.profile.job_id, task.spec.task_id}) != nullptr;
        TimeMs max_push = 0;
        for (int w = 0; w < job.profile.num_workers; ++w) {
            TimeMs delay = 0;
            if (strag_it != job.stragglers.end()) {
                auto dit = strag_it->second.find(w);
                if (dit != strag_it->second.end()) {
                    delay = dit->second;
                    emit(log("StragglerDelay")
                             .with("job", job.profile.job_id)
                             .with("worker", static_cast<std::int64_t>(w))
                             .with("iter", job.iter)
                             .with("delay_ms", delay));
                }
            }
            const TimeMs push_at = now_ + task.offset + delay;
            if (slow_path) {
                Event ev;
                ev.kind = EvKind::PushDepart;
                ev.job = job.profile.job_id;
                ev.task = static_cast<int>(ti);
                ev.worker = w;
                schedule(push_at, std::move(ev));
            } else {
                max_push = std::max(max_push, push_at);
            }
        }
        if (!slow_path) {
            Event ev;
            ev.kind = EvKind::TaskReady;
            ev.job = job.profile.job_id;
            ev.task = static_cast<int>(ti);
            schedule(max_push, std::move(ev));
        }
    }
}

void Engine::on_push_depart(const Event& ev) {
    JobRt& job = jobs_.at(ev.job);
    if (!job.active) return;
    TaskRt& task = job.tasks[static_cast<std::size_t>(ev.task)];
    const AggId target = task.agent_table[static_cast<std::size_t>(ev.worker)];
    if (opts_.log_detail == RecordLevel::debug) {
        emit(log("TensorPush", RecordLevel::debug)
                 .with("job", ev.job)
                 .with("task", task.spec.task_id)
                 .with("worker", static_cast<std::int64_t>(ev.worker))
                 .with("agg", static_cast<std::int64_t>(target)));
    }
    const std::int64_t dur = transfer_ms(task.spec.size_bytes, target);
    if (dur == 0) {
        push_arrived(job, ev.task, ev.worker, now_);
        return;
    }
    AggRt& rt = agg_rt_.at(target);
    const TimeMs arrive = std::max(now_, rt.ingress_busy) + dur;
    rt.ingress_busy = arrive;
    Event next;
    next.kind = EvKind::PushArrive;
    next.job = ev.job;
    next.task = ev.task;
    next.worker = ev.worker;
    schedule(arrive, std::move(next));
}

void Engine::push_arrived(JobRt& job, int ti, int worker, TimeMs t) {
    TaskRt& task = job.tasks[static_cast<std::size_t>(ti)];
    task.last_push_ms = std::max(task.last_push_ms, t);
    if (--task.pushes_outstanding == 0) {
        on_task_ready(job, ti, task.last_push_ms);
    }
}

AggId Engine::owner_agg(const JobRt& job, int ti) const {
    const TaskRt& task = job.tasks[static_cast<std::size_t>(ti)];
    const migration::TensorRef ref{job.profile.job_id, task.spec.task_id};
    const migration::MigrationSession* s = sessions_.find(ref);
    if (s == nullptr) {
        return clusters_.at(job.cluster).state.sched.assignment.agg_of(job.profile.job_id,
                                                                       task.spec.task_id);
    }
    // Redirect not yet dispatched: the source still owns the master copy.
    if (s->phase == migration::Phase::Init || s->phase == migration::Phase::AwaitPull) {
        return s->from_agg;
    }
    return s->to_agg;
}

void Engine::on_task_ready(JobRt& job, int ti, TimeMs t) {
    TaskRt& task = job.tasks[static_cast<std::size_t>(ti)];
    const migration::TensorRef ref{job.profile.job_id, task.spec.task_id};
    migration::MigrationSession* s = sessions_.find(ref);
    const AggId agg = owner_agg(job, ti);
    if (s != nullptr && agg == s->to_agg) {
        sessions_.on_push_at_destination(*s);
        if (!s->worker_done_seen) {
            sessions_.on_worker_done_notified(*s);
            emit(log("MigrationMsg")
                     .with("session", static_cast<std::int64_t>(s->session_id))
                     .with("msg", std::string(migration::to_string(
                              migration::MsgKind::WORKER_DONE)))
                     .with("from", static_cast<std::int64_t>(s->from_agg))
                     .with("to", static_cast<std::int64_t>(s->to_agg)));
        }
        if (!migration::can_execute_update_at_destination(*s)) {
            // Master copy still in flight: defer the update.
            SessionRt& rt = session_rt_.at(s->session_id);
            if (rt.first_deferred_ready < 0) rt.first_deferred_ready = t;
            rt.deferred.emplace_back(job.profile.job_id, ti);
            session_progress(*s);
            return;
        }
        session_progress(*s);
        if (sessions_.find(ref) == nullptr) {
            dispatch_request(job, ti, t, agg);
            return;
        }
    }
    dispatch_request(job, ti, t, agg);
}

void Engine::dispatch_request(JobRt& job, int ti, TimeMs ready, AggId agg) {
    TaskRt& task = job.tasks[static_cast<std::size_t>(ti)];
    if (task.pending) throw std::logic_error("overlapping requests for one task");
    AggRt& rt = agg_rt_.at(agg);
    const TimeMs exec = task.spec.exec_time_ms;

    TimeMs start = -1;
    const TimeMs next_unserved =
        next_instance_after(rt, job.profile.job_id, task.spec.task_id, task.mark);
    if (next_unserved >= 0 && next_unserved >= ready) {
        start = next_unserved;  // on schedule
        task.mark = start;
    } else {
        // Missed the slot (or no slot on this aggregator): free capacity in
        // the current cycle after reserving the remaining scheduled slots,
        // else the task's next slot.
        const TimeMs cycle = rt.cycle > 0 ? rt.cycle : exec;
        const TimeMs cycle_end = (ready / cycle + 1) * cycle;
        std::vector<Obstacle> obstacles;
        for (const auto& [cs, ce] : rt.committed) {
            if (ce > ready && cs < cycle_end + 2 * cycle) obstacles.push_back({cs, ce});
        }
        const TimeMs base = (ready / cycle) * cycle;
        for (const auto& [key, pat] : rt.patterns) {
            if (key.first == job.profile.job_id && key.second == task.spec.task_id) continue;
            for (TimeMs pos : pat.positions) {
                const TimeMs inst = base + pos;
                if (inst >= ready && inst < cycle_end) obstacles.push_back({inst, inst + pat.dur});
            }
        }
        const TimeMs next_inst =
            next_instance_after(rt, job.profile.job_id, task.spec.task_id, ready);
        LateDecision d = handle_late_request(obstacles, cycle_end, ready, exec,
                                             next_inst >= 0 ? next_inst : -1);
        if (d.execute_now) {
            start = d.at_ms;
            task.mark = ready;
        } else if (next_inst >= 0) {
            start = next_inst;  // postponed to the next cycle's slot
            task.mark = start;
        } else {
            // No slot pattern here (migration tail): earliest free time.
            std::sort(obstacles.begin(), obstacles.end(),
                      [](const Obstacle& a, const Obstacle& b) { return a.start < b.start; });
            TimeMs g = ready;
            for (const auto& ob : obstacles) {
                if (ob.end <= g) continue;
                if (ob.start >= g + exec) break;
                g = ob.end;
            }
            start = g;
            task.mark = ready;
        }
    }

    task.pending = true;
    task.ready_at = ready;
    rt.committed[start] = start + exec;
    Event ev;
    ev.kind = EvKind::ExecStart;
    ev.job = job.profile.job_id;
    ev.task = ti;
    ev.agg = agg;
    schedule(start, std::move(ev));
}

void Engine::exec_start(const Event& ev) {
    if (opts_.log_detail == RecordLevel::debug) {
        JobRt& job = jobs_.at(ev.job);
        emit(log("AggSlotStart", RecordLevel::debug)
                 .with("job", ev.job)
                 .with("task", job.tasks[static_cast<std::size_t>(ev.task)].spec.task_id)
                 .with("agg", static_cast<std::int64_t>(ev.agg)));
    }
    JobRt& job = jobs_.at(ev.job);
    const TimeMs exec = job.tasks[static_cast<std::size_t>(ev.task)].spec.exec_time_ms;
    Event end;
    end.kind = EvKind::ExecEnd;
    end.job = ev.job;
    end.task = ev.task;
    end.agg = ev.agg;
    schedule(now_ + exec, std::move(end));
}

void Engine::exec_end(const Event& ev) {
    JobRt& job = jobs_.at(ev.job);
    TaskRt& task = job.tasks[static_cast<std::size_t>(ev.task)];
    AggRt& rt = agg_rt_.at(ev.agg);
    rt.committed.erase(now_ - task.spec.exec_time_ms);
    task.pending = false;
    if (opts_.log_detail == RecordLevel::debug) {
        emit(log("AggSlotEnd", RecordLevel::debug)
                 .with("job", ev.job)
                 .with("task", task.spec.task_id)
                 .with("agg", static_cast<std::int64_t>(ev.agg)));
    }

    // Migration step: the pull responses after MIGRATE_INIT carry the
    // redirect; once they are all out, the source copies the tensor.
    const migration::TensorRef ref{job.profile.job_id, task.spec.task_id};
    migration::MigrationSession* s = sessions_.find(ref);
    if (s != nullptr && ev.agg == s->from_agg && s->phase == migration::Phase::AwaitPull) {
        for (int w = 0; w < job.profile.num_workers; ++w) {
            task.agent_table[static_cast<std::size_t>(w)] = s->to_agg;
            sessions_.on_pull_response(*s, "agent-" + std::to_string(w),
                                       job.profile.num_workers);
        }
        emit(log("MigrationMsg")
                 .with("session", static_cast<std::int64_t>(s->session_id))
                 .with("msg", std::string(migration::to_string(
                          migration::MsgKind::PULL_RESPONSE_WITH_REDIRECT)))
                 .with("from", static_cast<std::int64_t>(s->from_agg))
                 .with("to", static_cast<std::int64_t>(s->to_agg)));
        start_copy(*s, job, ev.task);
    }

    // Pull responses; egress serialization only matters when a transfer has
    // a visible duration.
    const std::int64_t dur = transfer_ms(task.spec.size_bytes, ev.agg);
    TimeMs last = now_;
    if (dur > 0) {
        for (int w = 0; w < job.profile.num_workers; ++w) {
            const TimeMs arrive = std::max(now_, rt.egress_busy) + dur;
            rt.egress_busy = arrive;
            last = std::max(last, arrive);
        }
    }
    if (opts_.log_detail == RecordLevel::debug) {
        emit(log("PullResponse", RecordLevel::debug)
                 .with("job", ev.job)
                 .with("task", task.spec.task_id)
                 .with("agg", static_cast<std::int64_t>(ev.agg))
                 .with("done_ms", last));
    }
    if (last == now_) {
        part_done(job, ev.task, now_);
    } else {
        Event done;
        done.kind = EvKind::PartDone;
        done.job = ev.job;
        done.task = ev.task;
        schedule(last, std::move(done));
    }
}

void Engine::part_done(JobRt& job, int ti, TimeMs t) {
    job.last_part_ms = std::max(job.last_part_ms, t);
    if (--job.parts_outstanding > 0) return;
    const TimeMs completion =
        std::max(job.iter_start + job.profile.iter_duration_ms, job.last_part_ms);
    Event ev;
    ev.kind = EvKind::IterationDone;
    ev.job = job.profile.job_id;
    schedule(completion, std::move(ev));
}

void Engine::iteration_done(JobRt& job) {
    ++job.completions;
    job.history.push_back(now_);
    const std::size_t keep = static_cast<std::size_t>(acfg_.monitor_iterations) + 1;
    while (job.history.size() > keep) job.history.pop_front();
    if (opts_.record_completions) job.all_completions.push_back(now_);
    if (opts_.log_detail == RecordLevel::debug) {
        emit(log("IterationStart", RecordLevel::debug)
                 .with("job", job.profile.job_id)
                 .with("iter", job.iter + 1));
    }

    if (job.completions - job.window_anchor_count >=
        static_cast<std::int64_t>(acfg_.monitor_iterations)) {
        monitor_tick(job);
    }
    if (!job.active) return;  // monitor action may have ended the job
    if (now_ - job.submit_ms >= job.duration_ms) {
        on_job_exit(job);
        return;
    }
    start_iteration(job);
}

// ---------------------------------------------------------------------------
// Monitoring and feedback
// ---------------------------------------------------------------------------

void Engine::monitor_tick(JobRt& job) {
    const std::int64_t iters = job.completions - job.window_anchor_count;
    const Rational mean =
        Rational(now_ - job.window_anchor_time, iters);
    job.window_anchor_count = job.completions;
    job.window_anchor_time = now_;
    job.last_window_mean = mean;

    const Rational profiled(job.profile.iter_duration_ms);
    const Rational loss = perf_loss(job.profile.iter_duration_ms, rational_max(mean, profiled));
    emit(log("MonitorTick")
             .with("job", job.profile.job_id)
             .with("iters", iters)
             .with("mean_num", mean.num())
             .with("mean_den", mean.den())
             .with("loss_num", loss.num())
             .with("loss_den", loss.den())
             .with("probation", static_cast<std::int64_t>(job.in_probation ? 1 : 0)));

    if (job.reassigning) return;  // wait for migrations to settle

    Cluster& cl = clusters_.at(job.cluster);
    const auto hosting = cl.state.sched.assignment.aggs_of(job.profile.job_id);

    if (job.in_probation) {
        std::map<JobId, Rational> losses;
        losses[job.profile.job_id] = loss;
        for (const auto& [other_id, other] : jobs_) {
            if (other_id == job.profile.job_id || !other.active) continue;
            if (other.cluster != job.cluster) continue;
            const auto other_aggs = cl.state.sched.assignment.aggs_of(other_id);
            const bool shares = std::any_of(hosting.begin(), hosting.end(), [&](AggId a) {
                return std::find(other_aggs.begin(), other_aggs.end(), a) != other_aggs.end();
            });
            if (shares) losses[other_id] = trailing_loss(other);
        }
        auto decision = job.controller->on_probation_result(losses, hosting);
        if (decision.kind == scaling::ArrivalController::Decision::Kind::settle) {
            job.in_probation = false;
            bool clean = true;
            for (const auto& [jid, l] : losses) {
                if (l >= acfg_.loss_limit) clean = false;
            }
            if (clean) job.controller->reset_budget();
        } else {
            do_revert(job, decision.exclude);
        }
        return;
    }

    // Measured loss past the limit on a settled job: either interference
    // (reassign off the slowed aggregator) or a bad packing decision, in
    // which case the newest co-located assignment is revoked.
    if (loss >= acfg_.loss_limit) {
        std::set<AggId> flagged;
        for (AggId a : hosting) {
            const AggRt& rt = agg_rt_.at(a);
            if (rt.last_slowdown_seen >= 0 && rt.last_slowdown_seen >= job.window_anchor_time -
                    static_cast<TimeMs>(iters) * job.profile.iter_duration_ms) {
                flagged.insert(a);
            }
        }
        if (!flagged.empty()) {
            mitigate_interference(job, flagged);
            return;
        }
        // The most recent arrival sharing these aggregators is the likely
        // cause; revoke its placement (its own revert budget applies).
        JobRt* culprit = nullptr;
        for (auto& [other_id, other] : jobs_) {
            if (!other.active || other.reassigning || other.cluster != job.cluster) continue;
            const auto other_aggs = cl.state.sched.assignment.aggs_of(other_id);
            const bool shares =
                other_id == job.profile.job_id ||
                std::any_of(hosting.begin(), hosting.end(), [&](AggId a) {
                    return std::find(other_aggs.begin(), other_aggs.end(), a) != other_aggs.end();
                });
            if (!shares) continue;
            if (culprit == nullptr || other.submit_ms > culprit->submit_ms) culprit = &other;
        }
        if (culprit != nullptr && culprit->controller != nullptr) {
            const auto culprit_aggs =
                cl.state.sched.assignment.aggs_of(culprit->profile.job_id);
            std::map<JobId, Rational> synthetic{{job.profile.job_id, loss}};
            auto decision = culprit->controller->on_probation_result(synthetic, culprit_aggs);
            if (decision.kind == scaling::ArrivalController::Decision::Kind::revert) {
                do_revert(*culprit, decision.exclude);
            }
        }
    }
}

Rational Engine::trailing_loss(const JobRt& job) const {
    if (job.history.size() < 2) return Rational(0);
    const std::size_t w = job.history.size() - 1;
    const Rational mean =
        Rational(job.history.back() - job.history.front(), static_cast<std::int64_t>(w));
    const Rational profiled(job.profile.iter_duration_ms);
    return perf_loss(job.profile.iter_duration_ms, rational_max(mean, profiled));
}

void Engine::do_revert(JobRt& job, const std::set<AggId>& exclude) {
    const JobId id = job.profile.job_id;
    ++job.reverts;
    Cluster& cl = clusters_.at(job.cluster);
    emit(log("revert")
             .with("job", id)
             .with("round", static_cast<std::int64_t>(job.reverts)));

    // Remember where tensors live now, then re-place the whole job. The
    // measurement already condemned sharing, so the re-assignment considers
    // idle capacity only: one fresh aggregator is added and every
    // aggregator still serving other jobs is off-limits.
    std::map<TaskId, AggId> old_home;
    for (const auto& t : job.tasks) {
        old_home[t.spec.task_id] = cl.state.sched.assignment.agg_of(id, t.spec.task_id);
    }
    scaling::remove_job(cl.state.sched, id, profiles_);
    fresh_agg(cl);

    AssignOptions opts;
    opts.allow_alloc = true;
    opts.exclude = exclude;
    for (const auto& [aid, agg] : cl.state.sched.aggs) {
        if (!agg.empty()) opts.exclude.insert(aid);
    }
    cl.state.sched.next_agg_id = next_agg_id_;
    auto placed = assign_job(cl.state.sched, job.profile, profiles_, acfg_, opts);
    emit_new_allocations(cl);
    sync_agg_runtime(cl);
    if (!placed) throw std::logic_error("re-assignment after revert failed");

    std::vector<scaling::TaskMove> moves;
    for (const auto& e : *placed) {
        const AggId from = old_home.at(e.task_id);
        if (from != e.agg_id) moves.push_back({id, e.task_id, from, e.agg_id});
    }
    begin_migrations(job, moves);
    job.in_probation = true;
}

void Engine::mitigate_interference(JobRt& job, const std::set<AggId>& flagged) {
    const JobId id = job.profile.job_id;
    Cluster& cl = clusters_.at(job.cluster);
    emit(log("reassign").with("job", id).with("reason", std::string("interference")));

    std::vector<scaling::TaskMove> moves;
    for (auto& t : job.tasks) {
        const AggId from = cl.state.sched.assignment.agg_of(id, t.spec.task_id);
        if (!flagged.contains(from)) continue;
        // Pull this tensor out and re-place it away from flagged aggregators.
        std::erase_if(cl.state.sched.assignment.entries, [&](const Assignment::Entry& e) {
            return e.job_id == id && e.task_id == t.spec.task_id;
        });
        auto& tasks_here = cl.state.sched.aggs.at(from).assigned.at(id);
        std::erase_if(tasks_here, [&](const AggTask& at) { return at.task_id == t.spec.task_id; });
        if (tasks_here.empty()) cl.state.sched.aggs.at(from).assigned.erase(id);

        AssignOptions opts;
        opts.allow_alloc = opts_.allow_new_aggs;
        opts.exclude = flagged;
        cl.state.sched.next_agg_id = next_agg_id_;
        auto res = assign_task(cl.state.sched, t.spec, job.profile, profiles_, acfg_, opts);
        emit_new_allocations(cl);
        if (!res) {
            // Nowhere to go: restore the old placement.
            cl.state.sched.assignment.add(id, t.spec.task_id, from);
            cl.state.sched.aggs.at(from).assigned[id].push_back(t.spec);
            rebuild_schedules(cl.state.sched.aggs, profiles_,
                              cl.state.sched.assignment.job_order(),
                              PlacementEffort::resilient);
            continue;
        }
        if (res->agg_id != from) moves.push_back({id, t.spec.task_id, from, res->agg_id});
    }
    sync_agg_runtime(cl);
    if (!moves.empty()) begin_migrations(job, moves);
}

void Engine::begin_migrations(JobRt& job, const std::vector<scaling::TaskMove>& moves) {
    if (moves.empty()) {
        job.window_anchor_count = job.completions;
        job.window_anchor_time = now_;
        return;
    }
    job.reassigning = true;
    job.pending_migrations += static_cast<int>(moves.size());
    for (const auto& mv : moves) {
        auto& s = sessions_.initiate({mv.job_id, mv.task_id}, mv.from_agg, mv.to_agg);
        session_rt_[s.session_id] = SessionRt{};
        sessions_.on_init_received(s);  // control messages land instantly
        if (agg_rt_.count(mv.from_agg)) ++agg_rt_.at(mv.from_agg).drain_sessions;
        emit(log("MigrationMsg")
                 .with("session", static_cast<std::int64_t>(s.session_id))
                 .with("msg",
                       std::string(migration::to_string(migration::MsgKind::MIGRATE_INIT)))
                 .with("from", static_cast<std::int64_t>(mv.from_agg))
                 .with("to", static_cast<std::int64_t>(mv.to_agg))
                 .with("job", mv.job_id)
                 .with("task", mv.task_id));
    }
}

// ---------------------------------------------------------------------------
// Migration mechanics
// ---------------------------------------------------------------------------

void Engine::start_copy(migration::MigrationSession& s, const JobRt& job, int ti) {
    s.phase = migration::Phase::Copying;
    const TaskRt& task = job.tasks[static_cast<std::size_t>(ti)];
    AggRt& src = agg_rt_.at(s.from_agg);
    const TimeMs base = migration::copy_transfer_ms(task.spec.size_bytes,
                                                    opts_.config.bandwidth_gbps,
                                                    opts_.config.per_message_overhead_ms);
    const TimeMs dur = base * src.slowdown;
    const TimeMs finish = std::max(now_, src.egress_busy) + dur;
    src.egress_busy = finish;
    session_rt_.at(s.session_id).copy_finish = finish;
    emit(log("MigrationMsg")
             .with("session", static_cast<std::int64_t>(s.session_id))
             .with("msg", std::string(migration::to_string(migration::MsgKind::TENSOR_COPY)))
             .with("from", static_cast<std::int64_t>(s.from_agg))
             .with("to", static_cast<std::int64_t>(s.to_agg))
             .with("bytes", task.spec.size_bytes));
    Event ev;
    ev.kind = EvKind::CopyArrive;
    ev.session = s.session_id;
    ev.job = job.profile.job_id;
    ev.task = ti;
    schedule(finish, std::move(ev));
}

void Engine::on_copy_arrive(const Event& ev) {
    migration::MigrationSession* s = sessions_.find_by_id(ev.session);
    if (s == nullptr) return;  // aborted (job exit)
    sessions_.on_copy_arrived(*s);
    sessions_.on_copy_done_notified(*s);
    SessionRt& rt = session_rt_.at(s->session_id);
    s->stall_ms = rt.first_deferred_ready < 0
                      ? 0
                      : migration::measure_stall(rt.copy_finish, rt.first_deferred_ready);
    emit(log("MigrationMsg")
             .with("session", static_cast<std::int64_t>(s->session_id))
             .with("msg",
                   std::string(migration::to_string(migration::MsgKind::TENSOR_COPY_DONE)))
             .with("from", static_cast<std::int64_t>(s->from_agg))
             .with("to", static_cast<std::int64_t>(s->to_agg)));
    auto deferred = std::move(rt.deferred);
    rt.deferred.clear();
    const AggId dest = s->to_agg;
    session_progress(*s);
    for (const auto& [jid, ti] : deferred) {
        auto jit = jobs_.find(jid);
        if (jit == jobs_.end() || !jit->second.active) continue;
        dispatch_request(jit->second, ti, now_, dest);
    }
}

void Engine::session_progress(migration::MigrationSession& s) {
    if (s.phase == migration::Phase::Complete) finish_session(s.tensor);
}

void Engine::finish_session(migration::TensorRef ref) {
    migration::MigrationSession done = sessions_.retire(ref);
    emit(log("MigrationMsg")
             .with("session", static_cast<std::int64_t>(done.session_id))
             .with("msg", std::string("complete"))
             .with("from", static_cast<std::int64_t>(done.from_agg))
             .with("to", static_cast<std::int64_t>(done.to_agg))
             .with("stall_ms", done.stall_ms));
    session_rt_.erase(done.session_id);

    auto src = agg_rt_.find(done.from_agg);
    if (src != agg_rt_.end() && --src->second.drain_sessions == 0) {
        Cluster& cl = clusters_.at(src->second.cluster);
        auto it = cl.state.sched.aggs.find(done.from_agg);
        if (it != cl.state.sched.aggs.end() && it->second.status == AggStatus::draining &&
            it->second.empty()) {
            release_agg(cl, done.from_agg);
        }
    }

    auto jit = jobs_.find(ref.job_id);
    if (jit != jobs_.end() && jit->second.pending_migrations > 0) {
        JobRt& job = jit->second;
        if (--job.pending_migrations == 0 && job.reassigning) {
            // Any migration batch re-opens probation: the new placement is
            // judged by measurement like a fresh arrival.
            job.reassigning = false;
            job.in_probation = true;
            job.window_anchor_count = job.completions;
            job.window_anchor_time = now_;
        }
    }
}

void Engine::abort_job_sessions(JobRt& job) {
    for (auto& task : job.tasks) {
        const migration::TensorRef ref{job.profile.job_id, task.spec.task_id};
        migration::MigrationSession* s = sessions_.find(ref);
        if (s == nullptr) continue;
        emit(log("MigrationMsg")
                 .with("session", static_cast<std::int64_t>(s->session_id))
                 .with("msg", std::string("aborted"))
                 .with("from", static_cast<std::int64_t>(s->from_agg))
                 .with("to", static_cast<std::int64_t>(s->to_agg)));
        auto src = agg_rt_.find(s->from_agg);
        if (src != agg_rt_.end()) --src->second.drain_sessions;
        session_rt_.erase(s->session_id);
        s->phase = migration::Phase::Complete;  // force retire
        s->copy_done_seen = s->worker_done_seen = true;
        sessions_.retire(ref);
    }
    job.pending_migrations = 0;
    job.reassigning = false;
}

TimeMs Engine::next_instance_after(const AggRt& rt, const JobId& job, const TaskId& task,
                                   TimeMs t) const {
    auto it = rt.patterns.find({job, task});
    if (it == rt.patterns.end() || it->second.positions.empty() || rt.cycle <= 0) return -1;
    const TimeMs cycle = rt.cycle;
    const TimeMs m = t / cycle;
    TimeMs best = -1;
    for (TimeMs pos : it->second.positions) {
        TimeMs cand = m * cycle + pos;
        if (cand <= t) cand += cycle;
        if (best < 0 || cand < best) best = cand;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

SimResult Engine::run() {
    std::stable_sort(trace_.begin(), trace_.end(),
                     [](const io::TraceRecord& a, const io::TraceRecord& b) {
                         return a.submit_time_ms < b.submit_time_ms;
                     });
    for (int i = 0; i < opts_.config.clusters_initial; ++i) new_cluster();
    for (std::size_t i = 0; i < trace_.size(); ++i) {
        Event ev;
        ev.kind = EvKind::JobArrive;
        ev.index = i;
        schedule(trace_[i].submit_time_ms, std::move(ev));
    }
    for (std::size_t i = 0; i < opts_.interference.size(); ++i) {
        Event on;
        on.kind = EvKind::InterferenceStart;
        on.index = i;
        schedule(opts_.interference[i].start_ms, std::move(on));
        Event off;
        off.kind = EvKind::InterferenceEnd;
        off.index = i;
        schedule(opts_.interference[i].end_ms, std::move(off));
    }
    trace_cursor_pending_ = !trace_.empty();

    const std::uint64_t event_guard = 2'000'000'000ULL;
    std::size_t arrivals_seen = 0;
    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.t;
        if (++events_ > event_guard) throw std::runtime_error("event guard tripped");

        switch (ev.kind) {
            case EvKind::JobArrive:
                ++arrivals_seen;
                trace_cursor_pending_ = arrivals_seen < trace_.size();
                on_job_arrive(trace_[ev.index]);
                break;
            case EvKind::IterationDone: {
                auto it = jobs_.find(ev.job);
                if (it != jobs_.end() && it->second.active) iteration_done(it->second);
                break;
            }
            case EvKind::PushDepart:
                on_push_depart(ev);
                break;
            case EvKind::PushArrive: {
                auto it = jobs_.find(ev.job);
                if (it != jobs_.end() && it->second.active) {
                    push_arrived(it->second, ev.task, ev.worker, now_);
                }
                break;
            }
            case EvKind::TaskReady: {
                auto it = jobs_.find(ev.job);
                if (it != jobs_.end() && it->second.active) {
                    on_task_ready(it->second, ev.task, now_);
                }
                break;
            }
            case EvKind::ExecStart:
                if (jobs_.count(ev.job) && jobs_.at(ev.job).active) exec_start(ev);
                break;
            case EvKind::ExecEnd:
                if (jobs_.count(ev.job) && jobs_.at(ev.job).active) exec_end(ev);
                break;
            case EvKind::PartDone: {
                auto it = jobs_.find(ev.job);
                if (it != jobs_.end() && it->second.active) {
                    part_done(it->second, ev.task, now_);
                }
                break;
            }
            case EvKind::CopyArrive:
                on_copy_arrive(ev);
                break;
            case EvKind::ScaleTick:
                on_scale_tick(ev.cluster);
                break;
            case EvKind::InterferenceStart: {
                const auto& spec = opts_.interference[ev.index];
                auto it = agg_rt_.find(spec.target_agg);
                if (it != agg_rt_.end()) {
                    it->second.slowdown = std::max(it->second.slowdown, spec.slowdown_factor);
                }
                emit(log("InterferenceStart")
                         .with("agg", static_cast<std::int64_t>(spec.target_agg))
                         .with("factor", spec.slowdown_factor));
                break;
            }
            case EvKind::InterferenceEnd: {
                const auto& spec = opts_.interference[ev.index];
                auto it = agg_rt_.find(spec.target_agg);
                if (it != agg_rt_.end()) {
                    std::int64_t f = 1;
                    for (const auto& other : opts_.interference) {
                        if (other.target_agg == spec.target_agg && other.start_ms <= now_ &&
                            other.end_ms > now_) {
                            f = std::max(f, other.slowdown_factor);
                        }
                    }
                    it->second.slowdown = f;
                }
                emit(log("InterferenceEnd")
                         .with("agg", static_cast<std::int64_t>(spec.target_agg)));
                break;
            }
        }
    }

    emit(log("SimEnd").with("t", now_));

    SimResult result;
    result.end_time_ms = now_;
    result.events_processed = events_;
    result.metrics = collect_metrics(records_, opts_.config.interval_ms);
    for (auto& [id, job] : jobs_) {
        JobStatsOut out;
        out.completions = std::move(job.all_completions);
        out.iterations = job.completions;
        out.last_window_mean = job.last_window_mean;
        out.reverts = job.reverts;
        auto cit = clusters_.find(job.cluster);
        if (cit != clusters_.end()) {
            out.final_aggs = cit->second.state.sched.assignment.aggs_of(id);
        }
        result.jobs.emplace(id, std::move(out));
    }
    return result;
}

}  // namespace

SimResult run_simulation(const std::vector<io::TraceRecord>& trace,
                         const std::map<std::string, JobProfile>& models, const SimOptions& opts,
                         LogSink* sink) {
    Engine engine(trace, models, opts, sink);
    return engine.run();
}

std::vector<PerfPoint> run_interference_scenario(const std::vector<io::TraceRecord>& trace,
                                                 const std::map<std::string, JobProfile>& models,
                                                 SimOptions opts,
                                                 std::vector<InterferenceSpec> interference,
                                                 bool allow_new_aggs, SimResult* result_out) {
    opts.interference = std::move(interference);
    opts.allow_new_aggs = allow_new_aggs;
    VectorSink sink(RecordLevel::info);
    SimResult result = run_simulation(trace, models, opts, &sink);
    std::map<JobId, TimeMs> profiled;
    std::vector<PerfPoint> points;
    for (const auto& r : sink.records()) {
        if (r.kind == "JobArrive") {
            profiled[*r.field("job")] = r.int_field("iter_ms");
        } else if (r.kind == "MonitorTick") {
            const JobId job = *r.field("job");
            const Rational mean(r.int_field("mean_num"), r.int_field("mean_den"));
            if (mean.num() <= 0) continue;
            points.push_back(
                {r.time_ms, job, (Rational(profiled.at(job)) / mean).to_double()});
        }
    }
    if (result_out != nullptr) *result_out = std::move(result);
    return points;
}

}  // namespace psim::sim
