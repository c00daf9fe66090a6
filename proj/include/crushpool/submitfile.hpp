#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crushpool {

struct SubmitStanza {
    std::string arguments;
    std::uint32_t queue_count = 1;

    bool operator==(const SubmitStanza&) const = default;
};

/// A parsed or generated submission file. Keys other than Universe,
/// Executable, Log, Output and Arguments land in `extra`, in file order.
struct SubmitDescription {
    std::string universe = "vanilla";
    std::string executable;
    std::string log_name = "log";
    std::string output_template = "output.$(Process)";
    std::vector<std::pair<std::string, std::string>> extra;
    std::vector<SubmitStanza> stanzas;

    std::size_t job_count() const;
    bool operator==(const SubmitDescription&) const = default;
};

struct ClusterId {
    std::uint64_t value = 0;

    auto operator<=>(const ClusterId&) const = default;
};

/// The makesub output for a battery, byte for byte.
std::string generate_submit(std::string_view executable, std::string_view battery);

/// Renders any description in the same layout generate_submit uses.
std::string render_submit(const SubmitDescription& desc);

/// Line-oriented parser. `Arguments` persists until the next `Arguments`
/// line; `Queue [N]` queues N jobs with the current arguments. Throws
/// ParseError with the line number on malformed input.
SubmitDescription parse_submit(std::string_view text);

/// Expands `$(Process)` in an output template.
std::string expand_output_name(std::string_view output_template, std::uint64_t proc);

/// `<jobs> job(s) submitted to cluster <id>.`
std::string format_submit_ack(std::uint64_t jobs, ClusterId cluster);

/// The token right after the word "cluster" and at least one whitespace
/// character: the same rule as grep -oP "cluster\s+\K\w+".
ClusterId parse_cluster_id(std::string_view text);

}  // namespace crushpool
