#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "crushpool/generators.hpp"
#include "crushpool/stitch.hpp"
#include "crushpool/pool.hpp"
#include "crushpool/submitfile.hpp"

namespace crushpool {

inline constexpr std::string_view kSubmitFileName = "runTest";

struct RunConfig {
    GeneratorSpec generator;
    std::string battery;               // makesub spelling
    std::filesystem::path dest_dir;    // relative paths resolve against pool.workdir
    double poll_interval_s = 12.0;
    PoolConfig pool;
    std::optional<double> give_up_after_s;  // pool-clock budget; unset = wait forever

    void validate() const;  // throws ConfigError
};

struct RunReport {
    ClusterId cluster;
    bool completed = false;
    double wall_time_s = 0.0;          // pool clock: virtual in Simulated mode
    double submit_host_busy_s = 0.0;   // real time in orchestrator code, excluding waits
    int wave_count = 0;
    std::size_t held_events = 0;
    std::filesystem::path results_path;
    std::filesystem::path stats_path;
};

/// ceil(jobs / slots); throws ConfigError when slots is zero.
int compute_wave_count(std::size_t jobs, std::size_t slots);

/// Distinct STARTED timestamps and HELD line count in an event log.
int count_start_cohorts(std::string_view log_text);
std::size_t count_held_events(std::string_view log_text);

/// The master pipeline: write runTest, submit, poll with hold repair and
/// release, stitch into dest_dir, clean up, print the closing banner.
/// Progress text goes to `out`.
RunReport run_master(const RunConfig& cfg, std::ostream& out);

/// Recomputes the battery sequentially in-process, stitches it through the
/// same formatter and byte-compares with the run's results.txt.
/// Throws IoError when the results file is missing.
bool verify_equivalence(const RunConfig& cfg);

/// The results.txt / stats.txt a sequential run produces.
StitchedText sequential_reference(BatteryKind battery, const GeneratorSpec& gen);

}  // namespace crushpool
