#include "crushpool/orchestrator.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "crushpool/battery.hpp"
#include "crushpool/errors.hpp"
#include "crushpool/monitor.hpp"
#include "crushpool/stitch.hpp"

namespace crushpool {

namespace fs = std::filesystem;

namespace {

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point t) {
    return std::chrono::duration<double>(SteadyClock::now() - t).count();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path resolve_dest(const RunConfig& cfg) {
    return cfg.dest_dir.is_absolute() ? cfg.dest_dir : cfg.pool.workdir / cfg.dest_dir;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        fn(text.substr(pos, end - pos));
        pos = end + 1;
    }
}

// Makes every output.* file writable again, as `chmod 777 output.*` does.
void repair_output_permissions(const fs::path& dir) {
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.path().filename().string().rfind("output.", 0) != 0) continue;
        fs::permissions(entry.path(), fs::perms::all, ec);
    }
}

}  // namespace

void RunConfig::validate() const {
    if (!(poll_interval_s > 0)) throw ConfigError("poll interval must be > 0");
    (void)parse_battery(battery);
    if (give_up_after_s && *give_up_after_s <= 0) throw ConfigError("time budget must be > 0");
    pool.validate();
}

int compute_wave_count(std::size_t jobs, std::size_t slots) {
    if (slots == 0) throw ConfigError("slot count must be >= 1");
    return static_cast<int>((jobs + slots - 1) / slots);
}

int count_start_cohorts(std::string_view log_text) {
    std::set<std::string_view> stamps;
    for_each_line(log_text, [&](std::string_view line) {
        const auto sp = line.find(' ');
        if (sp == std::string_view::npos || line.find(") STARTED") == std::string_view::npos) return;
        stamps.insert(line.substr(0, sp));
    });
    return static_cast<int>(stamps.size());
}

std::size_t count_held_events(std::string_view log_text) {
    std::size_t held = 0;
    for_each_line(log_text, [&](std::string_view line) {
        if (line.find(") HELD") != std::string_view::npos) ++held;
    });
    return held;
}

RunReport run_master(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto wall_start = SteadyClock::now();
    double waiting_s = 0.0;
    const auto battery = parse_battery(cfg.battery);
    const auto& workdir = cfg.pool.workdir;
    const auto submit_path = workdir / std::string(kSubmitFileName);

    Pool pool(cfg.pool);

    out << "making HTCondor submit file\n";
    {
        std::ofstream sub(submit_path, std::ios::binary | std::ios::trunc);
        if (!sub) throw IoError("cannot write " + submit_path.string());
        sub << generate_submit(generator_descriptor(cfg.generator), cfg.battery);
    }

    out << "\nsubmitting to HTCondor\n";
    const auto [submitted, jobs] = pool.submit(parse_submit(read_file(submit_path)));
    RunReport report;
    report.cluster = parse_cluster_id(format_submit_ack(jobs, submitted));
    out << "Condor Cluster Number : " << report.cluster.value << "\n\n";
    out << "checking for output files\n";
    out << "This may take some time, files are written after\n";
    out << "their corresponding tests have finished running\n";

    while (true) {
        const auto status = check_outputs(workdir, battery);
        if (status.state == CompletionState::Complete) {
            report.completed = true;
            out << "files generated\n";
            break;
        }
        out << status.message;
        const auto queue = pool.query();
        if (queue.idle + queue.running + queue.held == 0) {
            out << "\nno jobs left in the queue; outputs incomplete\n";
            break;
        }
        if (cfg.give_up_after_s && pool.now() >= *cfg.give_up_after_s) {
            out << "\ntime budget exhausted\n";
            break;
        }
        if (queue.held != 0) {
            repair_output_permissions(workdir);
            out << "\n";
            pool.release(report.cluster);
            out << "held tests released";
        }
        const auto wait_start = SteadyClock::now();
        pool.advance(UntilTime{pool.now() + cfg.poll_interval_s});
        waiting_s += seconds_since(wait_start);
        out << " . . ." << std::endl;
    }
    report.wall_time_s = pool.now();

    std::error_code ec;
    if (report.completed) {
        out << "\nJoining all output files\n";
        const auto stitched = stitch_results(workdir, battery, resolve_dest(cfg), out);
        out << "files joined, results.txt generated\n";
        report.results_path = stitched.results_path;
        report.stats_path = stitched.stats_path;
        const auto log_text = read_file(stitched.dest_dir / "log");
        report.wave_count = count_start_cohorts(log_text);
        report.held_events = count_held_events(log_text);
    } else {
        const auto log_text = read_file(workdir / "log");
        report.wave_count = count_start_cohorts(log_text);
        report.held_events = count_held_events(log_text);
    }

    out << "cleaning up directory\n";
    fs::remove(submit_path, ec);
    fs::remove(workdir / std::string(kRequestFileName), ec);

    if (report.completed) {
        out << "\n*******************************************************\n";
        out << "Testing complete. Results are in results.txt which is \n";
        out << "located in your current directory as well as in " << cfg.dest_dir.string() << "\n";
        out << "*******************************************************\n";
    }
    report.submit_host_busy_s = std::max(0.0, seconds_since(wall_start) - waiting_s);
    return report;
}

StitchedText sequential_reference(BatteryKind battery, const GeneratorSpec& gen) {
    const auto& spec = battery_spec(battery);
    const auto outcomes = run_sequential(battery, gen);
    std::vector<std::string> texts;
    texts.reserve(static_cast<std::size_t>(spec.job_count));
    for (int proc = 0; proc < spec.job_count; ++proc) {
        const auto p = static_cast<std::uint64_t>(proc);
        std::optional<TestOutcome> outcome;
        if (job_has_body(battery, p)) {
            outcome = outcomes[static_cast<std::size_t>(resolve_test_index(battery, proc) - 1)];
        }
        // The orchestrator's cluster is the first submission of a fresh pool,
        // so its start stamp is the clock origin.
        texts.push_back(render_job_output(outcome, job_meta(battery, p, gen, 0.0)));
    }
    return stitch_documents(battery, texts);
}

bool verify_equivalence(const RunConfig& cfg) {
    const auto battery = parse_battery(cfg.battery);
    const auto dest = resolve_dest(cfg);
    const auto results = read_file(dest / "results.txt");
    const auto reference = sequential_reference(battery, cfg.generator);
    if (results != reference.results) return false;
    std::error_code ec;
    if (fs::exists(dest / "stats.txt", ec)) return read_file(dest / "stats.txt") == reference.stats;
    return true;
}

}  // namespace crushpool
