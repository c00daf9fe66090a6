#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "crushpool/submitfile.hpp"

namespace crushpool {

enum class PoolMode { Real, Simulated };

enum class HoldCause { OutputNotWritable, Transient };

struct HoldFault {
    std::uint64_t proc = 0;  // applies to this proc in every cluster
    HoldCause cause = HoldCause::Transient;
};

struct NodeRestart {
    int node = 0;
    double time_s = 0.0;
};

struct BusyPeriod {
    int node = 0;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct FaultPlan {
    std::vector<HoldFault> hold_faults;
    std::vector<NodeRestart> node_restarts;
    std::vector<BusyPeriod> busy_periods;
};

struct PoolConfig {
    int node_count = 9;
    int slots_per_node = 8;
    std::optional<int> slot_limit;  // cap on concurrently running jobs
    double cpu_threshold_pct = 3.0;
    double required_idle_minutes = 15.0;
    PoolMode mode = PoolMode::Simulated;
    double sim_job_duration_s = 60.0;
    double poll_granularity_s = 0.05;  // Real mode coordinator wake-up
    double restart_delay_s = 30.0;
    std::vector<double> node_cpu_pct;  // owner load per node; missing = 0
    FaultPlan fault_plan;
    std::filesystem::path workdir = ".";

    int total_slots() const;
    void validate() const;  // throws ConfigError
};

std::string_view hold_cause_name(HoldCause cause);

enum class NodeActivity { Unclaimed, Claimed, Busy, Offline };
std::string_view node_activity_name(NodeActivity a);

struct NodeState {
    int id = 0;
    NodeActivity state = NodeActivity::Unclaimed;
    double cpu_pct = 0.0;
    double last_input_event_s = -std::numeric_limits<double>::infinity();
    int running_jobs = 0;
};

enum class JobState { Idle, Running, Held, Completed, Removed };
std::string_view job_state_name(JobState s);
bool is_legal_transition(JobState from, JobState to);

struct JobRecord {
    ClusterId cluster;
    std::uint64_t proc = 0;
    JobState state = JobState::Idle;
    std::optional<std::string> hold_reason;
    std::string arguments;
    std::filesystem::path output_path;
    double submitted_s = 0.0;
    std::optional<double> started_s;
    std::optional<double> finished_s;
    int node = -1;  // node of the current or last run
};

struct QueueSnapshot {
    std::size_t total = 0;
    std::size_t idle = 0;
    std::size_t running = 0;
    std::size_t held = 0;
    std::size_t completed = 0;
    std::size_t removed = 0;
    std::vector<JobRecord> jobs;
};

/// `<total> jobs; <idle> idle, <running> running, <held> held`
std::string render_queue_summary(const QueueSnapshot& snapshot);

enum class PoolEventKind {
    Submitted,
    Started,
    Held,
    Released,
    Preempted,
    Completed,
    Removed,
    NodeRestarted,
    NodeBusy,
    NodeUnclaimed,
};

struct PoolEvent {
    double time_s = 0.0;
    PoolEventKind kind = PoolEventKind::Submitted;
    ClusterId cluster;
    std::uint64_t proc = 0;
    int node = -1;
    std::string detail;  // hold reason
};

/// One log line: `<t> (<cluster>.<proc>) <EVENT>` or `<t> node <id> <EVENT>`.
std::string format_log_line(const PoolEvent& e);

/// What a job gets to see when it runs.
struct JobContext {
    ClusterId cluster;
    std::uint64_t proc = 0;
    std::string executable;
    std::string arguments;
    double cluster_submitted_s = 0.0;
};

/// The "executable" side of the pool. `run` returns the job's output text
/// or throws; it is called concurrently from workers. `validate` vets an
/// executable at submit time in Real mode.
struct JobRunner {
    std::function<void(const std::string& executable)> validate;
    std::function<std::string(const JobContext&)> run;
};

/// Interprets the executable as a generator descriptor and the arguments as
/// `<test_index> <battery_code>`, then runs that battery job in-process.
JobRunner battery_runner();

struct UntilQuiescent {};
struct UntilTime {
    double time_s = 0.0;
};
using AdvanceCondition = std::variant<UntilQuiescent, UntilTime>;

/// Name of the request file `release`/`rm` append to; a pool drains it from
/// its working directory on every scheduling pass.
inline constexpr std::string_view kRequestFileName = "pool.requests";

/// An opportunistic pool of node_count x slots_per_node slots. All state is
/// guarded by one mutex, so query/status are safe while another thread is
/// inside advance(). Simulated mode runs on a virtual clock driven by
/// advance(); Real mode runs jobs on worker threads and uses wall time since
/// the first submission.
class Pool {
public:
    explicit Pool(PoolConfig config, JobRunner runner = battery_runner());
    ~Pool();

    Pool(const Pool&) = delete;
    Pool& operator=(const Pool&) = delete;

    /// Queues one Idle job per queued stanza entry, creates every output file
    /// empty, logs SUBMITTED. Throws PoolError when Real mode rejects the
    /// executable.
    std::pair<ClusterId, std::size_t> submit(const SubmitDescription& desc);

    QueueSnapshot query() const;
    std::vector<NodeState> status() const;

    std::size_t release(ClusterId cluster);
    std::size_t remove(ClusterId cluster, std::optional<std::uint64_t> proc = std::nullopt);
    void restart_nodes(std::span<const int> node_ids);

    /// Runs the scheduler until the condition holds, or until nothing can
    /// change any more (idle jobs with no node that will ever be eligible).
    /// Returns elapsed pool-clock seconds.
    double advance(const AdvanceCondition& until);

    double now() const;
    std::vector<PoolEvent> events() const;
    const PoolConfig& config() const noexcept { return config_; }

private:
    struct Job {
        JobRecord record;
        std::string executable;
        std::filesystem::path log_path;
        std::uint64_t attempt = 0;
        bool transient_pending = false;
        int slot = -1;
    };
    struct Slot {
        int node = 0;
        int job = -1;  // index into jobs_
    };
    struct NodeInfo {
        double offline_until = -std::numeric_limits<double>::infinity();
        bool available = true;  // last observed owner/offline availability
    };
    struct FaultEvent {
        double time_s;
        bool restart;  // else busy start
        int node;
    };
    struct Completion {
        double time_s;
        int job;
        std::uint64_t attempt;
        bool operator>(const Completion& o) const {
            return time_s != o.time_s ? time_s > o.time_s : job > o.job;
        }
    };
    struct Finished {
        int job;
        std::uint64_t attempt;
        std::optional<std::string> output;
        std::string error;
    };
    struct Task {
        int job;
        std::uint64_t attempt;
        JobContext context;
    };

    double clock_now_locked() const;
    void tick_locked(double now);
    void drain_requests_locked(double now);
    void apply_faults_locked(double now);
    void update_availability_locked(double now);
    void collect_due_completions_locked(double now);
    void finish_job_locked(double now, Finished finished);
    void match_locked(double now);
    void preempt_node_locked(double now, int node);
    void restart_node_locked(double now, int node);
    std::size_t release_locked(double now, ClusterId cluster);
    std::size_t remove_locked(double now, ClusterId cluster, std::optional<std::uint64_t> proc);

    bool node_available_locked(int node, double now) const;
    bool owner_blocked(int node, double now) const;
    double owner_cpu(int node, double now) const;
    double last_input(int node, double now) const;
    double next_event_time_locked(double now) const;
    bool quiescent_locked() const;
    bool stalled_locked(double now) const;
    int running_count_locked() const;

    void transition_locked(Job& job, JobState to);
    void log_locked(PoolEvent e, const std::filesystem::path* log_path);
    JobContext context_locked(const Job& job) const;
    void start_workers_locked();
    void worker_loop(std::stop_token stop);

    PoolConfig config_;
    JobRunner runner_;

    mutable std::mutex mu_;
    std::condition_variable_any cv_;
    std::vector<Job> jobs_;
    std::vector<Slot> slots_;
    std::vector<NodeInfo> nodes_;
    std::vector<FaultEvent> faults_;
    std::size_t next_fault_ = 0;
    std::priority_queue<Completion, std::vector<Completion>, std::greater<>> sim_completions_;
    std::deque<Finished> real_completions_;
    std::deque<Task> tasks_;
    std::vector<std::jthread> workers_;
    std::map<std::uint64_t, double> cluster_submit_time_;
    std::map<std::filesystem::path, std::ofstream> logs_;
    std::vector<PoolEvent> events_;
    std::uint64_t next_cluster_ = 1;
    double sim_now_ = 0.0;
    std::optional<std::chrono::steady_clock::time_point> origin_;
};

/// Rebuilds a queue snapshot by replaying a log file's job events.
QueueSnapshot replay_queue(std::string_view log_text);

/// Rebuilds node states from a log: Offline after RESTARTED, Busy after
/// BUSY, Claimed while a STARTED job on the node has not ended.
std::vector<NodeState> replay_nodes(std::string_view log_text, int node_count);

}  // namespace crushpool
