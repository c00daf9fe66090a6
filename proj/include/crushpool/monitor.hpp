#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "crushpool/battery.hpp"

namespace crushpool {

enum class CompletionState { Complete, Incomplete };

struct CompletionStatus {
    CompletionState state = CompletionState::Incomplete;
    std::size_t done = 0;
    std::size_t expected = 0;
    std::string message;  // "<done>/<expected> files generated" when Incomplete

    int exit_code() const { return state == CompletionState::Complete ? 0 : 1; }
};

/// Counts output.0 .. output.<job_count-1> in `dir` that exist with size > 0.
/// Every index is examined, so gaps in the sequence do not stop the scan.
/// Read-only. Throws IoError if `dir` cannot be listed.
CompletionStatus check_outputs(const std::filesystem::path& dir, BatteryKind battery);

}  // namespace crushpool
