#include "crushpool/monitor.hpp"

#include <system_error>

#include "crushpool/errors.hpp"

namespace crushpool {

namespace fs = std::filesystem;

CompletionStatus check_outputs(const fs::path& dir, BatteryKind battery) {
    std::error_code ec;
    fs::directory_iterator probe(dir, ec);
    if (ec) throw IoError("cannot read directory " + dir.string() + ": " + ec.message());

    CompletionStatus status;
    status.expected = static_cast<std::size_t>(battery_spec(battery).job_count);
    for (std::size_t i = 0; i < status.expected; ++i) {
        const auto path = dir / ("output." + std::to_string(i));
        const auto size = fs::file_size(path, ec);
        if (!ec && size > 0 && fs::is_regular_file(path, ec)) ++status.done;
    }
    if (status.done == status.expected) {
        status.state = CompletionState::Complete;
    } else {
        status.message = std::to_string(status.done) + "/" + std::to_string(status.expected) + " files generated";
    }
    return status;
}

}  // namespace crushpool
