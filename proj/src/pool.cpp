#include "crushpool/pool.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <system_error>

#include "crushpool/battery.hpp"
#include "crushpool/errors.hpp"
#include "crushpool/generators.hpp"
#include "crushpool/stitch.hpp"

namespace crushpool {

namespace fs = std::filesystem;

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

std::string_view event_word(PoolEventKind k) {
    switch (k) {
        case PoolEventKind::Submitted: return "SUBMITTED";
        case PoolEventKind::Started: return "STARTED";
        case PoolEventKind::Held: return "HELD";
        case PoolEventKind::Released: return "RELEASED";
        case PoolEventKind::Preempted: return "PREEMPTED";
        case PoolEventKind::Completed: return "COMPLETED";
        case PoolEventKind::Removed: return "REMOVED";
        case PoolEventKind::NodeRestarted: return "RESTARTED";
        case PoolEventKind::NodeBusy: return "BUSY";
        case PoolEventKind::NodeUnclaimed: return "UNCLAIMED";
    }
    return "?";
}

bool is_node_event(PoolEventKind k) {
    return k == PoolEventKind::NodeRestarted || k == PoolEventKind::NodeBusy || k == PoolEventKind::NodeUnclaimed;
}

bool output_writable(const fs::path& path) {
    std::error_code ec;
    const auto st = fs::status(path, ec);
    if (ec || !fs::exists(st)) return true;
    // Mode bits, not access(2): the check must hold when running as root.
    const auto write_bits = fs::perms::owner_write | fs::perms::group_write | fs::perms::others_write;
    return (st.permissions() & write_bits) != fs::perms::none;
}

bool write_atomically(const fs::path& path, const std::string& content) {
    const auto tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return false;
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) return false;
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        return false;
    }
    return true;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        const auto start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

struct ParsedLogLine {
    bool node_event = false;
    std::uint64_t cluster = 0;
    std::uint64_t proc = 0;
    int node = -1;
    std::string_view event;
};

std::optional<ParsedLogLine> parse_log_line(std::string_view line) {
    const auto tokens = split_ws(line);
    if (tokens.size() < 3) return std::nullopt;
    ParsedLogLine out;
    if (tokens[1] == "node") {
        if (tokens.size() < 4 || !parse_int(tokens[2], out.node)) return std::nullopt;
        out.node_event = true;
        out.event = tokens[3];
        return out;
    }
    auto id = tokens[1];
    if (id.size() < 5 || id.front() != '(' || id.back() != ')') return std::nullopt;
    id = id.substr(1, id.size() - 2);
    const auto dot = id.find('.');
    if (dot == std::string_view::npos || !parse_int(id.substr(0, dot), out.cluster) ||
        !parse_int(id.substr(dot + 1), out.proc)) {
        return std::nullopt;
    }
    out.event = tokens[2];
    if (out.event == "STARTED" && tokens.size() >= 5 && tokens[3] == "node") {
        parse_int(tokens[4], out.node);
    }
    return out;
}

}  // namespace

int PoolConfig::total_slots() const {
    const int physical = node_count * slots_per_node;
    return slot_limit ? std::min(physical, *slot_limit) : physical;
}

void PoolConfig::validate() const {
    if (node_count < 1) throw ConfigError("node_count must be >= 1");
    if (slots_per_node < 1) throw ConfigError("slots_per_node must be >= 1");
    if (slot_limit && *slot_limit < 1) throw ConfigError("slot limit must be >= 1");
    if (sim_job_duration_s < 0) throw ConfigError("job duration must be >= 0");
    if (poll_granularity_s <= 0) throw ConfigError("poll granularity must be > 0");
    if (restart_delay_s < 0) throw ConfigError("restart delay must be >= 0");
    for (const auto& r : fault_plan.node_restarts) {
        if (r.time_s < 0) throw ConfigError("fault times must be non-negative");
        if (r.node < 0 || r.node >= node_count) throw ConfigError("restart names unknown node " + std::to_string(r.node));
    }
    for (const auto& b : fault_plan.busy_periods) {
        if (b.start_s < 0 || b.end_s < b.start_s) throw ConfigError("busy period times must satisfy 0 <= start <= end");
        if (b.node < 0 || b.node >= node_count) throw ConfigError("busy period names unknown node " + std::to_string(b.node));
    }
}

std::string_view hold_cause_name(HoldCause cause) {
    return cause == HoldCause::OutputNotWritable ? "OutputNotWritable" : "Transient";
}

std::string_view node_activity_name(NodeActivity a) {
    switch (a) {
        case NodeActivity::Unclaimed: return "Unclaimed";
        case NodeActivity::Claimed: return "Claimed";
        case NodeActivity::Busy: return "Busy";
        case NodeActivity::Offline: return "Offline";
    }
    return "?";
}

std::string_view job_state_name(JobState s) {
    switch (s) {
        case JobState::Idle: return "Idle";
        case JobState::Running: return "Running";
        case JobState::Held: return "Held";
        case JobState::Completed: return "Completed";
        case JobState::Removed: return "Removed";
    }
    return "?";
}

bool is_legal_transition(JobState from, JobState to) {
    using S = JobState;
    if (from == S::Completed || from == S::Removed) return false;
    if (to == S::Removed) return true;
    switch (from) {
        case S::Idle: return to == S::Running || to == S::Held;
        case S::Running: return to == S::Completed || to == S::Idle || to == S::Held;
        case S::Held: return to == S::Idle;
        default: return false;
    }
}

std::string render_queue_summary(const QueueSnapshot& s) {
    return std::to_string(s.total) + " jobs; " + std::to_string(s.idle) + " idle, " + std::to_string(s.running) +
           " running, " + std::to_string(s.held) + " held";
}

std::string format_log_line(const PoolEvent& e) {
    char stamp[64];
    std::snprintf(stamp, sizeof stamp, "%.3f", e.time_s);
    std::string line = stamp;
    if (is_node_event(e.kind)) {
        line += " node " + std::to_string(e.node) + " " + std::string(event_word(e.kind));
        return line;
    }
    line += " (" + std::to_string(e.cluster.value) + "." + std::to_string(e.proc) + ") ";
    line += event_word(e.kind);
    if (e.kind == PoolEventKind::Started) line += " node " + std::to_string(e.node);
    if (e.kind == PoolEventKind::Held) line += " " + e.detail;
    return line;
}

JobRunner battery_runner() {
    JobRunner r;
    r.validate = [](const std::string& executable) {
        const auto spec = parse_generator_descriptor(executable);
        (void)make_generator(spec, 0);  // opens byte-stream files
    };
    r.run = [](const JobContext& ctx) {
        const auto args = split_ws(ctx.arguments);
        int index = 0;
        int code = 0;
        if (args.size() != 2 || !parse_int(args[0], index) || !parse_int(args[1], code)) {
            throw UsageError("job arguments must be '<test_index> <battery_code>', got '" + ctx.arguments + "'");
        }
        const auto gen = parse_generator_descriptor(ctx.executable);
        return execute_job(battery_from_code(code), static_cast<std::uint64_t>(index), gen, ctx.cluster_submitted_s);
    };
    return r;
}

// ---------------------------------------------------------------------------

Pool::Pool(PoolConfig config, JobRunner runner) : config_(std::move(config)), runner_(std::move(runner)) {
    config_.validate();
    for (int n = 0; n < config_.node_count; ++n) {
        for (int s = 0; s < config_.slots_per_node; ++s) slots_.push_back({n, -1});
    }
    nodes_.resize(static_cast<std::size_t>(config_.node_count));
    for (int n = 0; n < config_.node_count; ++n) {
        nodes_[static_cast<std::size_t>(n)].available = node_available_locked(n, 0.0);
    }
    for (const auto& r : config_.fault_plan.node_restarts) faults_.push_back({r.time_s, true, r.node});
    for (const auto& b : config_.fault_plan.busy_periods) faults_.push_back({b.start_s, false, b.node});
    std::stable_sort(faults_.begin(), faults_.end(),
                     [](const FaultEvent& a, const FaultEvent& b) { return a.time_s < b.time_s; });
}

Pool::~Pool() {
    for (auto& w : workers_) w.request_stop();
    cv_.notify_all();
    workers_.clear();
}

double Pool::clock_now_locked() const {
    if (config_.mode == PoolMode::Simulated) return sim_now_;
    if (!origin_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - *origin_).count();
}

double Pool::now() const {
    std::lock_guard lk(mu_);
    return clock_now_locked();
}

std::vector<PoolEvent> Pool::events() const {
    std::lock_guard lk(mu_);
    return events_;
}

void Pool::log_locked(PoolEvent e, const fs::path* log_path) {
    const auto line = format_log_line(e);
    if (log_path) {
        auto it = logs_.find(*log_path);
        if (it == logs_.end()) {
            it = logs_.emplace(*log_path, std::ofstream(*log_path, std::ios::app)).first;
        }
        it->second << line << '\n' << std::flush;
    } else {
        for (auto& [path, out] : logs_) out << line << '\n' << std::flush;
    }
    events_.push_back(std::move(e));
}

void Pool::transition_locked(Job& job, JobState to) {
    if (!is_legal_transition(job.record.state, to)) {
        throw std::logic_error("illegal job transition " + std::string(job_state_name(job.record.state)) + " -> " +
                               std::string(job_state_name(to)));
    }
    job.record.state = to;
}

JobContext Pool::context_locked(const Job& job) const {
    return {job.record.cluster, job.record.proc, job.executable, job.record.arguments,
            cluster_submit_time_.at(job.record.cluster.value)};
}

std::pair<ClusterId, std::size_t> Pool::submit(const SubmitDescription& desc) {
    if (config_.mode == PoolMode::Real && runner_.validate) {
        try {
            runner_.validate(desc.executable);
        } catch (const std::exception& e) {
            throw PoolError(std::string("submission rejected: ") + e.what());
        }
    }
    std::lock_guard lk(mu_);
    if (config_.mode == PoolMode::Real && !origin_) origin_ = std::chrono::steady_clock::now();
    const double now = clock_now_locked();
    const ClusterId cluster{next_cluster_++};
    cluster_submit_time_[cluster.value] = now;

    const auto log_path = config_.workdir / (desc.log_name.empty() ? std::string("log") : desc.log_name);
    const auto output_template = desc.output_template.empty() ? std::string("output.$(Process)") : desc.output_template;

    std::size_t count = 0;
    for (const auto& stanza : desc.stanzas) {
        for (std::uint32_t q = 0; q < stanza.queue_count; ++q) {
            Job job;
            job.record.cluster = cluster;
            job.record.proc = count++;
            job.record.arguments = stanza.arguments;
            job.record.output_path = config_.workdir / expand_output_name(output_template, job.record.proc);
            job.record.submitted_s = now;
            job.executable = desc.executable;
            job.log_path = log_path;
            bool unwritable = false;
            for (const auto& f : config_.fault_plan.hold_faults) {
                if (f.proc != job.record.proc) continue;
                if (f.cause == HoldCause::Transient) job.transient_pending = true;
                if (f.cause == HoldCause::OutputNotWritable) unwritable = true;
            }
            {
                std::ofstream touch(job.record.output_path, std::ios::trunc);
                if (!touch) throw PoolError("cannot create output file " + job.record.output_path.string());
            }
            if (unwritable) {
                fs::permissions(job.record.output_path,
                                fs::perms::owner_read | fs::perms::group_read | fs::perms::others_read);
            }
            jobs_.push_back(std::move(job));
            const auto& rec = jobs_.back();
            log_locked({now, PoolEventKind::Submitted, cluster, rec.record.proc, -1, {}}, &rec.log_path);
        }
    }
    if (config_.mode == PoolMode::Real) start_workers_locked();
    return {cluster, count};
}

QueueSnapshot Pool::query() const {
    std::lock_guard lk(mu_);
    QueueSnapshot s;
    for (const auto& job : jobs_) {
        ++s.total;
        switch (job.record.state) {
            case JobState::Idle: ++s.idle; break;
            case JobState::Running: ++s.running; break;
            case JobState::Held: ++s.held; break;
            case JobState::Completed: ++s.completed; break;
            case JobState::Removed: ++s.removed; break;
        }
        s.jobs.push_back(job.record);
    }
    if (s.idle + s.running + s.held + s.completed + s.removed != s.total) {
        throw std::logic_error("queue conservation violated");
    }
    return s;
}

std::vector<NodeState> Pool::status() const {
    std::lock_guard lk(mu_);
    const double now = clock_now_locked();
    std::vector<NodeState> out;
    for (int n = 0; n < config_.node_count; ++n) {
        NodeState ns;
        ns.id = n;
        ns.cpu_pct = owner_cpu(n, now);
        ns.last_input_event_s = last_input(n, now);
        for (const auto& slot : slots_) {
            if (slot.node == n && slot.job >= 0) ++ns.running_jobs;
        }
        if (now < nodes_[static_cast<std::size_t>(n)].offline_until) {
            ns.state = NodeActivity::Offline;
        } else if (owner_blocked(n, now)) {
            ns.state = NodeActivity::Busy;
        } else if (ns.running_jobs > 0) {
            ns.state = NodeActivity::Claimed;
        } else {
            ns.state = NodeActivity::Unclaimed;
        }
        out.push_back(ns);
    }
    return out;
}

std::size_t Pool::release(ClusterId cluster) {
    std::lock_guard lk(mu_);
    return release_locked(clock_now_locked(), cluster);
}

std::size_t Pool::release_locked(double now, ClusterId cluster) {
    if (!cluster_submit_time_.contains(cluster.value)) {
        throw PoolError("unknown cluster " + std::to_string(cluster.value));
    }
    std::size_t moved = 0;
    for (auto& job : jobs_) {
        if (job.record.cluster != cluster || job.record.state != JobState::Held) continue;
        transition_locked(job, JobState::Idle);
        job.record.hold_reason.reset();
        log_locked({now, PoolEventKind::Released, cluster, job.record.proc, -1, {}}, &job.log_path);
        ++moved;
    }
    return moved;
}

std::size_t Pool::remove(ClusterId cluster, std::optional<std::uint64_t> proc) {
    std::lock_guard lk(mu_);
    return remove_locked(clock_now_locked(), cluster, proc);
}

std::size_t Pool::remove_locked(double now, ClusterId cluster, std::optional<std::uint64_t> proc) {
    if (!cluster_submit_time_.contains(cluster.value)) {
        throw PoolError("unknown cluster " + std::to_string(cluster.value));
    }
    bool found = !proc.has_value();
    std::size_t removed = 0;
    for (auto& job : jobs_) {
        if (job.record.cluster != cluster) continue;
        if (proc && job.record.proc != *proc) continue;
        found = true;
        const auto st = job.record.state;
        if (st == JobState::Completed || st == JobState::Removed) continue;
        if (st == JobState::Running) {
            slots_[static_cast<std::size_t>(job.slot)].job = -1;
            job.slot = -1;
            ++job.attempt;  // the worker's result is discarded
        }
        transition_locked(job, JobState::Removed);
        job.record.finished_s = now;
        log_locked({now, PoolEventKind::Removed, cluster, job.record.proc, -1, {}}, &job.log_path);
        ++removed;
    }
    if (!found) {
        throw PoolError("cluster " + std::to_string(cluster.value) + " has no proc " + std::to_string(*proc));
    }
    return removed;
}

void Pool::restart_nodes(std::span<const int> node_ids) {
    std::lock_guard lk(mu_);
    for (const int id : node_ids) {
        if (id < 0 || id >= config_.node_count) throw PoolError("unknown node " + std::to_string(id));
    }
    const double now = clock_now_locked();
    for (const int id : node_ids) restart_node_locked(now, id);
}

void Pool::preempt_node_locked(double now, int node) {
    for (auto& slot : slots_) {
        if (slot.node != node || slot.job < 0) continue;
        auto& job = jobs_[static_cast<std::size_t>(slot.job)];
        slot.job = -1;
        job.slot = -1;
        ++job.attempt;
        transition_locked(job, JobState::Idle);
        log_locked({now, PoolEventKind::Preempted, job.record.cluster, job.record.proc, node, {}}, &job.log_path);
    }
}

void Pool::restart_node_locked(double now, int node) {
    preempt_node_locked(now, node);
    auto& info = nodes_[static_cast<std::size_t>(node)];
    info.offline_until = now + config_.restart_delay_s;
    info.available = false;
    log_locked({now, PoolEventKind::NodeRestarted, {}, 0, node, {}}, nullptr);
}

double Pool::owner_cpu(int node, double now) const {
    for (const auto& b : config_.fault_plan.busy_periods) {
        if (b.node == node && b.start_s <= now && now < b.end_s) return 100.0;
    }
    const auto idx = static_cast<std::size_t>(node);
    return idx < config_.node_cpu_pct.size() ? config_.node_cpu_pct[idx] : 0.0;
}

double Pool::last_input(int node, double now) const {
    double last = -kInfinity;
    for (const auto& b : config_.fault_plan.busy_periods) {
        if (b.node != node || b.start_s > now) continue;
        last = std::max(last, now < b.end_s ? now : b.end_s);
    }
    return last;
}

bool Pool::owner_blocked(int node, double now) const {
    if (owner_cpu(node, now) >= config_.cpu_threshold_pct) return true;
    return now - last_input(node, now) < config_.required_idle_minutes * 60.0;
}

bool Pool::node_available_locked(int node, double now) const {
    return now >= nodes_[static_cast<std::size_t>(node)].offline_until && !owner_blocked(node, now);
}

int Pool::running_count_locked() const {
    int running = 0;
    for (const auto& slot : slots_) running += slot.job >= 0 ? 1 : 0;
    return running;
}

void Pool::drain_requests_locked(double now) {
    const auto path = config_.workdir / std::string(kRequestFileName);
    std::error_code ec;
    if (!fs::exists(path, ec)) return;
    const auto claimed = config_.workdir / (std::string(kRequestFileName) + ".draining");
    fs::rename(path, claimed, ec);
    if (ec) return;
    std::ifstream in(claimed);
    std::string line;
    while (std::getline(in, line)) {
        const auto tok = split_ws(line);
        std::uint64_t cluster = 0;
        if (tok.size() < 2 || !parse_int(tok[1], cluster)) continue;
        try {
            if (tok[0] == "release") {
                release_locked(now, ClusterId{cluster});
            } else if (tok[0] == "rm") {
                std::optional<std::uint64_t> proc;
                std::uint64_t p = 0;
                if (tok.size() >= 3 && parse_int(tok[2], p)) proc = p;
                remove_locked(now, ClusterId{cluster}, proc);
            }
        } catch (const PoolError&) {
            // Requests for clusters this pool never saw are dropped.
        }
    }
    in.close();
    fs::remove(claimed, ec);
}

void Pool::apply_faults_locked(double now) {
    while (next_fault_ < faults_.size() && faults_[next_fault_].time_s <= now) {
        const auto f = faults_[next_fault_++];
        if (f.restart) {
            restart_node_locked(f.time_s, f.node);
        } else {
            preempt_node_locked(f.time_s, f.node);
            nodes_[static_cast<std::size_t>(f.node)].available = false;
            log_locked({f.time_s, PoolEventKind::NodeBusy, {}, 0, f.node, {}}, nullptr);
        }
    }
}

void Pool::update_availability_locked(double now) {
    for (int n = 0; n < config_.node_count; ++n) {
        auto& info = nodes_[static_cast<std::size_t>(n)];
        const bool avail = node_available_locked(n, now);
        if (avail && !info.available) log_locked({now, PoolEventKind::NodeUnclaimed, {}, 0, n, {}}, nullptr);
        info.available = avail;
    }
}

void Pool::collect_due_completions_locked(double now) {
    if (config_.mode == PoolMode::Real) {
        while (!real_completions_.empty()) {
            auto f = std::move(real_completions_.front());
            real_completions_.pop_front();
            finish_job_locked(now, std::move(f));
        }
        return;
    }
    std::vector<Finished> due;
    std::vector<JobContext> contexts;
    while (!sim_completions_.empty() && sim_completions_.top().time_s <= now) {
        const auto c = sim_completions_.top();
        sim_completions_.pop();
        const auto& job = jobs_[static_cast<std::size_t>(c.job)];
        if (job.record.state != JobState::Running || job.attempt != c.attempt) continue;
        due.push_back({c.job, c.attempt, std::nullopt, {}});
        contexts.push_back(context_locked(job));
    }
    // Jobs that finish at the same virtual instant run their payloads in parallel.
    const auto count = static_cast<long>(due.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < count; ++i) {
        auto& f = due[static_cast<std::size_t>(i)];
        if (jobs_[static_cast<std::size_t>(f.job)].transient_pending) continue;
        try {
            f.output = runner_.run(contexts[static_cast<std::size_t>(i)]);
        } catch (const std::exception& e) {
            f.error = e.what();
        }
    }
    for (auto& f : due) finish_job_locked(now, std::move(f));
}

void Pool::finish_job_locked(double now, Finished f) {
    auto& job = jobs_[static_cast<std::size_t>(f.job)];
    if (job.record.state != JobState::Running || job.attempt != f.attempt) return;
    slots_[static_cast<std::size_t>(job.slot)].job = -1;
    job.slot = -1;

    auto hold = [&](std::string reason) {
        transition_locked(job, JobState::Held);
        job.record.hold_reason = reason;
        log_locked({now, PoolEventKind::Held, job.record.cluster, job.record.proc, job.record.node, std::move(reason)},
                   &job.log_path);
    };
    if (job.transient_pending) {
        job.transient_pending = false;
        hold(std::string(hold_cause_name(HoldCause::Transient)));
        return;
    }
    if (!f.output) {
        hold("ExecutionError: " + f.error);
        return;
    }
    if (!output_writable(job.record.output_path) || !write_atomically(job.record.output_path, *f.output)) {
        hold(std::string(hold_cause_name(HoldCause::OutputNotWritable)));
        return;
    }
    transition_locked(job, JobState::Completed);
    job.record.finished_s = now;
    log_locked({now, PoolEventKind::Completed, job.record.cluster, job.record.proc, job.record.node, {}}, &job.log_path);
}

void Pool::match_locked(double now) {
    const int limit = config_.total_slots();
    int running = running_count_locked();
    std::size_t next_slot = 0;
    bool posted = false;
    for (std::size_t j = 0; j < jobs_.size() && running < limit; ++j) {
        auto& job = jobs_[j];
        if (job.record.state != JobState::Idle) continue;
        while (next_slot < slots_.size() &&
               (slots_[next_slot].job >= 0 || !node_available_locked(slots_[next_slot].node, now))) {
            ++next_slot;
        }
        if (next_slot == slots_.size()) break;
        auto& slot = slots_[next_slot];
        slot.job = static_cast<int>(j);
        job.slot = static_cast<int>(next_slot);
        transition_locked(job, JobState::Running);
        job.record.started_s = now;
        job.record.node = slot.node;
        ++job.attempt;
        ++running;
        log_locked({now, PoolEventKind::Started, job.record.cluster, job.record.proc, slot.node, {}}, &job.log_path);
        if (config_.mode == PoolMode::Simulated) {
            sim_completions_.push({now + config_.sim_job_duration_s, static_cast<int>(j), job.attempt});
        } else {
            tasks_.push_back({static_cast<int>(j), job.attempt, context_locked(job)});
            posted = true;
        }
    }
    if (posted) cv_.notify_all();
}

void Pool::tick_locked(double now) {
    drain_requests_locked(now);
    collect_due_completions_locked(now);
    apply_faults_locked(now);
    update_availability_locked(now);
    match_locked(now);
}

double Pool::next_event_time_locked(double now) const {
    double next = kInfinity;
    if (!sim_completions_.empty()) next = std::max(now, sim_completions_.top().time_s);
    if (next_fault_ < faults_.size()) next = std::min(next, std::max(now, faults_[next_fault_].time_s));
    const double cooldown = config_.required_idle_minutes * 60.0;
    for (const auto& info : nodes_) {
        if (info.offline_until > now) next = std::min(next, info.offline_until);
    }
    for (const auto& b : config_.fault_plan.busy_periods) {
        if (b.end_s > now) next = std::min(next, b.end_s);
        if (b.end_s + cooldown > now) next = std::min(next, b.end_s + cooldown);
    }
    return next;
}

bool Pool::quiescent_locked() const {
    return std::none_of(jobs_.begin(), jobs_.end(), [](const Job& j) {
        return j.record.state == JobState::Idle || j.record.state == JobState::Running;
    });
}

bool Pool::stalled_locked(double now) const {
    if (running_count_locked() > 0 || !real_completions_.empty()) return false;
    const bool idle = std::any_of(jobs_.begin(), jobs_.end(),
                                  [](const Job& j) { return j.record.state == JobState::Idle; });
    return idle && next_event_time_locked(now) == kInfinity;
}

void Pool::start_workers_locked() {
    if (!workers_.empty()) return;
    const int count = config_.total_slots();
    workers_.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
    }
}

void Pool::worker_loop(std::stop_token stop) {
    std::unique_lock lk(mu_);
    while (true) {
        if (!cv_.wait(lk, stop, [&] { return !tasks_.empty(); })) return;
        Task task = std::move(tasks_.front());
        tasks_.pop_front();
        const auto& job = jobs_[static_cast<std::size_t>(task.job)];
        if (job.record.state != JobState::Running || job.attempt != task.attempt) continue;

        lk.unlock();
        Finished f{task.job, task.attempt, std::nullopt, {}};
        try {
            f.output = runner_.run(task.context);
        } catch (const std::exception& e) {
            f.error = e.what();
        }
        lk.lock();
        real_completions_.push_back(std::move(f));
        cv_.notify_all();
    }
}

double Pool::advance(const AdvanceCondition& until) {
    std::unique_lock lk(mu_);
    const double start = clock_now_locked();
    const auto* deadline = std::get_if<UntilTime>(&until);
    auto satisfied = [&](double now) { return deadline ? now >= deadline->time_s : quiescent_locked(); };

    if (config_.mode == PoolMode::Simulated) {
        while (true) {
            tick_locked(sim_now_);
            if (satisfied(sim_now_)) break;
            double next = next_event_time_locked(sim_now_);
            if (deadline) next = std::min(next, deadline->time_s);
            if (next == kInfinity) break;
            sim_now_ = next;
        }
        return sim_now_ - start;
    }

    while (true) {
        const double now = clock_now_locked();
        tick_locked(now);
        if (satisfied(now)) break;
        if (!deadline && stalled_locked(now)) break;
        double wait = config_.poll_granularity_s;
        if (deadline) wait = std::min(wait, deadline->time_s - now);
        wait = std::min(wait, next_event_time_locked(now) - now);
        if (wait > 0) {
            cv_.wait_for(lk, std::chrono::duration<double>(wait), [&] { return !real_completions_.empty(); });
        }
    }
    return clock_now_locked() - start;
}

// ---------------------------------------------------------------------------

QueueSnapshot replay_queue(std::string_view log_text) {
    std::map<std::pair<std::uint64_t, std::uint64_t>, JobRecord> jobs;
    std::size_t pos = 0;
    while (pos < log_text.size()) {
        const auto nl = log_text.find('\n', pos);
        const auto line = log_text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? log_text.size() : nl + 1;
        const auto parsed = parse_log_line(line);
        if (!parsed || parsed->node_event) continue;
        auto& rec = jobs[{parsed->cluster, parsed->proc}];
        rec.cluster = ClusterId{parsed->cluster};
        rec.proc = parsed->proc;
        const auto ev = parsed->event;
        if (ev == "SUBMITTED" || ev == "RELEASED" || ev == "PREEMPTED") {
            rec.state = JobState::Idle;
            rec.hold_reason.reset();
        } else if (ev == "STARTED") {
            rec.state = JobState::Running;
            rec.node = parsed->node;
        } else if (ev == "HELD") {
            rec.state = JobState::Held;
        } else if (ev == "COMPLETED") {
            rec.state = JobState::Completed;
        } else if (ev == "REMOVED") {
            rec.state = JobState::Removed;
        }
    }
    QueueSnapshot s;
    for (auto& [key, rec] : jobs) {
        ++s.total;
        switch (rec.state) {
            case JobState::Idle: ++s.idle; break;
            case JobState::Running: ++s.running; break;
            case JobState::Held: ++s.held; break;
            case JobState::Completed: ++s.completed; break;
            case JobState::Removed: ++s.removed; break;
        }
        s.jobs.push_back(std::move(rec));
    }
    return s;
}

std::vector<NodeState> replay_nodes(std::string_view log_text, int node_count) {
    std::vector<NodeState> nodes(static_cast<std::size_t>(std::max(node_count, 0)));
    for (int i = 0; i < node_count; ++i) nodes[static_cast<std::size_t>(i)].id = i;
    std::map<std::pair<std::uint64_t, std::uint64_t>, int> running_on;

    std::size_t pos = 0;
    while (pos < log_text.size()) {
        const auto nl = log_text.find('\n', pos);
        const auto line = log_text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? log_text.size() : nl + 1;
        const auto parsed = parse_log_line(line);
        if (!parsed) continue;
        if (parsed->node_event) {
            if (parsed->node < 0 || parsed->node >= node_count) continue;
            auto& n = nodes[static_cast<std::size_t>(parsed->node)];
            if (parsed->event == "RESTARTED") n.state = NodeActivity::Offline;
            if (parsed->event == "BUSY") n.state = NodeActivity::Busy;
            if (parsed->event == "UNCLAIMED") n.state = NodeActivity::Unclaimed;
            continue;
        }
        const std::pair key{parsed->cluster, parsed->proc};
        if (parsed->event == "STARTED") {
            if (parsed->node >= 0 && parsed->node < node_count) running_on[key] = parsed->node;
        } else if (parsed->event != "SUBMITTED") {
            running_on.erase(key);
        }
    }
    for (const auto& [key, node] : running_on) ++nodes[static_cast<std::size_t>(node)].running_jobs;
    for (auto& n : nodes) {
        if (n.state == NodeActivity::Unclaimed && n.running_jobs > 0) n.state = NodeActivity::Claimed;
    }
    return nodes;
}

}  // namespace crushpool
