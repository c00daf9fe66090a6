#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crushpool/battery.hpp"

namespace crushpool {

struct JobMeta {
    BatteryKind battery = BatteryKind::SmallCrush;
    std::uint64_t proc = 0;
    std::string generator;        // CLI name
    std::uint64_t seed = 0;       // effective seed of the job's instance
    double started_s = 0.0;       // cluster submit time on the pool clock
};

/// Structure of one output.<proc> file. `header` is empty for headerless
/// documents (SmallCrush jobs after 0); `summary` starts at the "Summary"
/// line and includes it.
struct JobOutputDoc {
    std::vector<std::string> header;
    std::vector<std::string> body;
    std::optional<std::vector<std::string>> summary;

    bool operator==(const JobOutputDoc&) const = default;
};

inline constexpr std::size_t kHeaderLines = 6;

/// Does this job's document carry the 6-line header / a test body?
bool job_has_header(BatteryKind battery, std::uint64_t proc);
bool job_has_body(BatteryKind battery, std::uint64_t proc);

/// Metadata the pool's executor stamps on job `proc` for generator `gen`.
JobMeta job_meta(BatteryKind battery, std::uint64_t proc, const GeneratorSpec& gen, double started_s);

/// Header-only for Crush/BigCrush job 0; header + body for SmallCrush job 0;
/// body only for SmallCrush jobs 1..10; header + body otherwise.
std::string render_job_output(const std::optional<TestOutcome>& outcome, const JobMeta& meta);

/// Runs the job's test and renders it: what one pool job writes.
std::string execute_job(BatteryKind battery, std::uint64_t proc, const GeneratorSpec& gen, double started_s);

std::string render_doc(const JobOutputDoc& doc);
JobOutputDoc parse_job_output(std::string_view text);

struct StitchedText {
    std::string results;
    std::string stats;
    std::size_t jobs_stitched = 0;
};

/// The in-memory half of stitching: assembles results.txt and stats.txt
/// from the job documents output.0 .. output.<job_count-1>, in order.
StitchedText stitch_documents(BatteryKind battery, const std::vector<std::string>& job_texts);

struct StitchReport {
    std::filesystem::path results_path;
    std::filesystem::path stats_path;
    std::filesystem::path dest_dir;
    std::size_t jobs_stitched = 0;
    bool dest_created = false;
};

/// superstitch: writes results.txt and stats.txt into `dir`, moves the
/// output files and the log into `dest`, and copies the two reports there.
/// Progress (job indices, a line break before every tenth) goes to
/// `progress`. Throws IoError naming a missing index before touching any
/// file.
StitchReport stitch_results(const std::filesystem::path& dir, BatteryKind battery,
                            const std::filesystem::path& dest, std::ostream& progress);

}  // namespace crushpool
