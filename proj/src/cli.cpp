#include "crushpool/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "crushpool/battery.hpp"
#include "crushpool/errors.hpp"
#include "crushpool/monitor.hpp"
#include "crushpool/orchestrator.hpp"
#include "crushpool/pool.hpp"
#include "crushpool/stitch.hpp"
#include "crushpool/submitfile.hpp"

namespace crushpool {

namespace fs = std::filesystem;

namespace {

constexpr int kExitIncomplete = 1;
constexpr int kExitUsage = 2;

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

struct ConfigEntry {
    std::string key;
    std::string value;
};

// Reads `key = value` lines; '#' starts a comment.
std::vector<ConfigEntry> read_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::vector<ConfigEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(file.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        ConfigEntry entry{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (entry.key.empty()) throw ConfigError(file.string() + ":" + std::to_string(line_no) + ": empty key");
        if (entry.value.size() >= 2 && entry.value.front() == '"' && entry.value.back() == '"') {
            entry.value = entry.value.substr(1, entry.value.size() - 2);
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

bool given_explicitly(const std::vector<std::string>& tokens, const std::string& option) {
    return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
        return t == option || t.rfind(option + "=", 0) == 0;
    });
}

// Turns `--config FILE` of the run subcommand into ordinary option tokens.
// Options given explicitly on the command line take precedence; repeatable
// --fault entries from both sources accumulate.
std::vector<std::string> expand_run_config(const std::vector<std::string>& args) {
    const auto run_it = std::find(args.begin(), args.end(), "run");
    if (run_it == args.end()) return args;
    std::vector<std::string> rest;
    std::vector<fs::path> files;
    for (auto it = run_it + 1; it != args.end(); ++it) {
        if (*it == "--config") {
            if (it + 1 == args.end()) throw ConfigError("--config requires a file argument");
            files.emplace_back(*++it);
        } else if (it->rfind("--config=", 0) == 0) {
            files.emplace_back(it->substr(9));
        } else {
            rest.push_back(*it);
        }
    }
    std::vector<std::string> out(args.begin(), run_it + 1);
    for (const auto& file : files) {
        for (const auto& [key, value] : read_config(file)) {
            const std::string option = "--" + key;
            if (key != "fault" && given_explicitly(rest, option)) continue;
            if (value == "true") {
                out.push_back(option);
            } else if (value != "false") {
                out.push_back(option);
                out.push_back(value);
            }
        }
    }
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, sep)) parts.push_back(part);
    return parts;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
    std::istringstream in(text);
    T value{};
    if (!(in >> value) || !in.eof()) throw UsageError("bad " + what + " '" + text + "'");
    return value;
}

/// hold:<proc>:transient|unwritable, restart:<node>:<t>, busy:<node>:<start>:<end>
void add_fault(FaultPlan& plan, const std::string& spec) {
    const auto parts = split(spec, ':');
    if (parts.size() == 3 && parts[0] == "hold") {
        HoldFault f;
        f.proc = parse_number<std::uint64_t>(parts[1], "proc");
        if (parts[2] == "transient") {
            f.cause = HoldCause::Transient;
        } else if (parts[2] == "unwritable") {
            f.cause = HoldCause::OutputNotWritable;
        } else {
            throw UsageError("hold cause must be transient or unwritable, got '" + parts[2] + "'");
        }
        plan.hold_faults.push_back(f);
    } else if (parts.size() == 3 && parts[0] == "restart") {
        plan.node_restarts.push_back({parse_number<int>(parts[1], "node"), parse_number<double>(parts[2], "time")});
    } else if (parts.size() == 4 && parts[0] == "busy") {
        plan.busy_periods.push_back({parse_number<int>(parts[1], "node"), parse_number<double>(parts[2], "start"),
                                     parse_number<double>(parts[3], "end")});
    } else {
        throw UsageError("unrecognised fault '" + spec +
                         "' (expected hold:<proc>:transient|unwritable, restart:<node>:<t> or busy:<node>:<s>:<e>)");
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void append_request(const fs::path& workdir, const std::string& line) {
    std::ofstream req(workdir / std::string(kRequestFileName), std::ios::app);
    if (!req) throw IoError("cannot write request file in " + workdir.string());
    req << line << '\n';
}

std::string format_p(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", p);
    return buf;
}

struct SelftestRow {
    const char* generator;
    BatteryKind battery;
    int test;
};

int selftest(std::uint64_t seed, std::ostream& out) {
    const SelftestRow rows[] = {
        {"randu", BatteryKind::BigCrush, 2},       {"randu", BatteryKind::BigCrush, 5},
        {"minstd", BatteryKind::SmallCrush, 1},    {"xorshift64star", BatteryKind::BigCrush, 2},
        {"xorshift64star", BatteryKind::BigCrush, 5}, {"xorshift64star", BatteryKind::SmallCrush, 1},
    };
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %-10s %4s  %-34s %10s  %s\n", "generator", "battery", "test", "name",
                  "p-value", "verdict");
    out << line;
    bool randu_fails = true;
    bool minstd_ok = true;
    for (const auto& row : rows) {
        const auto gen = parse_generator_name(row.generator, seed);
        const auto outcome = run_single_test(row.battery, row.test, gen);
        std::snprintf(line, sizeof line, "%-16s %-10s %4d  %-34s %10s  %s\n", row.generator,
                      std::string(battery_name(row.battery)).c_str(), row.test, outcome.name.c_str(),
                      format_p(outcome.p_value).c_str(), std::string(verdict_name(outcome.verdict)).c_str());
        out << line;
        if (std::string_view(row.generator) == "randu" && outcome.verdict != Verdict::Fail) randu_fails = false;
        if (std::string_view(row.generator) == "minstd" && outcome.verdict == Verdict::Fail) minstd_ok = false;
    }
    const bool ok = randu_fails && minstd_ok;
    out << (ok ? "selftest passed: randu fails the lattice tests, minstd passes monobit\n"
               : "selftest FAILED\n");
    return ok ? 0 : kExitIncomplete;
}

void print_nodes(const std::vector<NodeState>& nodes, std::ostream& out) {
    for (const auto& n : nodes) {
        out << "node " << n.id << ": " << node_activity_name(n.state) << ", " << n.running_jobs << " running\n";
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Distributed random-number-generator test battery on a simulated opportunistic pool", "crushpool"};
    app.require_subcommand(1, 1);
    std::string workdir_text = ".";
    app.add_option("--workdir", workdir_text, "Directory holding runTest, output.*, log")->capture_default_str();

    // run
    auto* run = app.add_subcommand("run", "Full pipeline: submit, poll, release holds, stitch");
    std::string gen_name, battery, dest;
    std::uint64_t seed = 0;
    std::optional<int> slots;
    int nodes = 9;
    int slots_per_node = 8;
    double cpu_threshold = 3.0;
    double idle_minutes = 15.0;
    bool simulated = false;
    double duration = 60.0;
    double poll = 12.0;
    double restart_delay = 30.0;
    std::optional<double> give_up;
    std::vector<std::string> faults;
    run->add_option("generator", gen_name, "minstd | randu | xorshift64star | zero | file:<path>")->required();
    run->add_option("battery", battery, "smallcrush | crush | bigcrush")->required();
    run->add_option("dest_dir", dest, "Directory receiving results and job outputs")->required();
    run->add_option("--seed", seed, "Master seed")->capture_default_str();
    run->add_option("--slots", slots, "Concurrent slot count (nodes = ceil(slots / 8))");
    run->add_option("--nodes", nodes, "Node count")->capture_default_str();
    run->add_option("--slots-per-node", slots_per_node, "Slots per node")->capture_default_str();
    run->add_option("--cpu-threshold", cpu_threshold, "Owner CPU percent above which a node is skipped")
        ->capture_default_str();
    run->add_option("--idle-minutes", idle_minutes, "Required owner input idle time")->capture_default_str();
    run->add_flag("--simulated", simulated, "Virtual-clock pool instead of worker threads");
    run->add_option("--duration", duration, "Simulated job duration in seconds")->capture_default_str();
    run->add_option("--poll", poll, "Seconds between output checks")->capture_default_str();
    run->add_option("--restart-delay", restart_delay, "Seconds a restarted node stays offline")
        ->capture_default_str();
    run->add_option("--give-up-after", give_up, "Abort polling after this many pool-clock seconds");
    run->add_option("--fault", faults, "hold:<proc>:transient|unwritable, restart:<node>:<t>, busy:<node>:<s>:<e>");
    std::string config_file;
    run->add_option("--config", config_file, "key = value file supplying defaults for these options");

    // makesub
    auto* makesub = app.add_subcommand("makesub", "Print the submit file for a battery");
    std::string executable;
    makesub->add_option("executable", executable, "Generator descriptor or executable name")->required();
    makesub->add_option("battery", battery, "smallcrush | crush | bigcrush")->required();

    // check
    auto* check = app.add_subcommand("check", "Report how many output files are complete");
    check->add_option("battery", battery)->required();

    // stitch
    auto* stitch = app.add_subcommand("stitch", "Join output files into results.txt and stats.txt");
    stitch->add_option("battery", battery)->required();
    stitch->add_option("dest_dir", dest)->required();

    // q / watch / status
    auto* q = app.add_subcommand("q", "Print the queue summary from the event log");
    auto* watch = app.add_subcommand("watch", "Print the queue summary every 2 seconds");
    int watch_count = 0;
    double watch_interval = 2.0;
    watch->add_option("--count", watch_count, "Stop after this many summaries (0 = until interrupted)");
    watch->add_option("--interval", watch_interval, "Seconds between summaries")->capture_default_str();
    auto* status = app.add_subcommand("status", "Print per-node state from the event log");
    status->add_option("--nodes", nodes, "Node count of the pool")->capture_default_str();

    // release / rm
    auto* release = app.add_subcommand("release", "Release held jobs of a cluster in the live pool");
    std::uint64_t cluster = 0;
    std::optional<std::uint64_t> proc;
    release->add_option("cluster", cluster)->required();
    auto* rm = app.add_subcommand("rm", "Remove a cluster, or one proc of it, from the live pool");
    rm->add_option("cluster", cluster)->required();
    rm->add_option("proc", proc);

    // selftest / job
    auto* self = app.add_subcommand("selftest", "RANDU-fails / minstd-passes demonstration");
    self->add_option("--seed", seed)->capture_default_str();
    auto* job = app.add_subcommand("job", "Run one job and print its output document");
    int test_index = 0;
    int code = 0;
    job->add_option("generator", gen_name, "Generator descriptor, e.g. minstd@42")->required();
    job->add_option("test_index", test_index)->required();
    job->add_option("battery_code", code)->required();

    std::vector<std::string> expanded;
    try {
        expanded = expand_run_config(args);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    const fs::path workdir = workdir_text;
    try {
        if (*run) {
            RunConfig cfg;
            cfg.generator = parse_generator_name(gen_name, seed);
            cfg.battery = battery;
            cfg.dest_dir = dest;
            cfg.poll_interval_s = poll;
            cfg.give_up_after_s = give_up;
            auto& pc = cfg.pool;
            pc.node_count = nodes;
            pc.slots_per_node = slots_per_node;
            if (slots) {
                if (*slots < 1) throw ConfigError("--slots must be >= 1");
                pc.node_count = (*slots + slots_per_node - 1) / slots_per_node;
                pc.slot_limit = *slots;
            }
            pc.cpu_threshold_pct = cpu_threshold;
            pc.required_idle_minutes = idle_minutes;
            pc.mode = simulated ? PoolMode::Simulated : PoolMode::Real;
            pc.sim_job_duration_s = duration;
            pc.restart_delay_s = restart_delay;
            pc.workdir = workdir;
            for (const auto& f : faults) add_fault(pc.fault_plan, f);
            const auto report = run_master(cfg, out);
            return report.completed ? 0 : kExitIncomplete;
        }
        if (*makesub) {
            out << generate_submit(executable, battery);
            return 0;
        }
        if (*check) {
            const auto st = check_outputs(workdir, parse_battery(battery));
            out << st.message;
            return st.exit_code();
        }
        if (*stitch) {
            const fs::path dest_path = fs::path(dest).is_absolute() ? fs::path(dest) : workdir / dest;
            stitch_results(workdir, parse_battery(battery), dest_path, out);
            return 0;
        }
        if (*q) {
            out << render_queue_summary(replay_queue(read_text(workdir / "log"))) << '\n';
            return 0;
        }
        if (*watch) {
            for (int i = 0; watch_count == 0 || i < watch_count; ++i) {
                if (i > 0) std::this_thread::sleep_for(std::chrono::duration<double>(watch_interval));
                std::string log;
                try {
                    log = read_text(workdir / "log");
                } catch (const IoError&) {
                    // No pool has written a log yet; report an empty queue.
                }
                out << render_queue_summary(replay_queue(log)) << std::endl;
            }
            return 0;
        }
        if (*status) {
            print_nodes(replay_nodes(read_text(workdir / "log"), nodes), out);
            return 0;
        }
        if (*release) {
            append_request(workdir, "release " + std::to_string(cluster));
            out << "release requested for cluster " << cluster << '\n';
            return 0;
        }
        if (*rm) {
            append_request(workdir, "rm " + std::to_string(cluster) + (proc ? " " + std::to_string(*proc) : ""));
            out << "removal requested for " << cluster << (proc ? "." + std::to_string(*proc) : "") << '\n';
            return 0;
        }
        if (*self) return selftest(seed, out);
        if (*job) {
            const auto gen = parse_generator_descriptor(gen_name);
            const auto kind = battery_from_code(code);
            if (test_index < 0) throw UsageError("test index must be >= 0");
            out << execute_job(kind, static_cast<std::uint64_t>(test_index), gen, 0.0);
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitIncomplete;
    }
    return kExitUsage;
}

}  // namespace crushpool
