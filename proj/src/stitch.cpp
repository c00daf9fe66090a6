#include "crushpool/stitch.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "crushpool/errors.hpp"

namespace crushpool {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kBannerFence = "==========";
constexpr std::string_view kSummaryMarker = "Summary";

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

bool is_banner(std::string_view line) {
    return line.size() >= 2 * kBannerFence.size() + 2 && line.substr(0, kBannerFence.size()) == kBannerFence &&
           line.substr(line.size() - kBannerFence.size()) == kBannerFence;
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        if (nl == std::string_view::npos) {
            lines.emplace_back(text);
            break;
        }
        lines.emplace_back(text.substr(0, nl));
        text.remove_prefix(nl + 1);
    }
    return lines;
}

void append_lines(std::string& out, const std::vector<std::string>& lines) {
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + path.string());
}

void move_file(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::rename(from, to, ec);
    if (!ec) return;
    // Cross-device: copy then unlink.
    fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("cannot move " + from.string() + " to " + to.string() + ": " + ec.message());
    fs::remove(from, ec);
}

int first_stitched_job(BatteryKind battery) {
    return battery == BatteryKind::SmallCrush ? 0 : 1;
}

}  // namespace

bool job_has_header(BatteryKind battery, std::uint64_t proc) {
    return battery != BatteryKind::SmallCrush || proc == 0;
}

bool job_has_body(BatteryKind battery, std::uint64_t proc) {
    return battery == BatteryKind::SmallCrush || proc != 0;
}

JobMeta job_meta(BatteryKind battery, std::uint64_t proc, const GeneratorSpec& gen, double started_s) {
    JobMeta meta;
    meta.battery = battery;
    meta.proc = proc;
    meta.generator = generator_name(gen);
    meta.started_s = started_s;
    if (gen.kind != GeneratorKind::ByteStreamFile) {
        const auto index = job_has_body(battery, proc)
                               ? static_cast<std::uint64_t>(resolve_test_index(battery, static_cast<int>(proc)))
                               : proc;
        meta.seed = mix_seed(gen.seed, index);
    }
    return meta;
}

std::string render_job_output(const std::optional<TestOutcome>& outcome, const JobMeta& meta) {
    JobOutputDoc doc;
    if (job_has_header(meta.battery, meta.proc)) {
        const auto name = std::string(battery_name(meta.battery));
        doc.header = {
            std::string(kBannerFence) + " " + name + " " + std::string(kBannerFence),
            "job: " + std::to_string(meta.proc),
            "generator: " + meta.generator,
            "seed: " + std::to_string(meta.seed),
            "started: " + fixed(meta.started_s, 3),
            std::string(40, '-'),
        };
    }
    if (outcome) {
        doc.body = {
            "",
            "Test " + std::to_string(outcome->index) + ": " + outcome->name,
            " samples: " + std::to_string(outcome->samples_used),
            " statistic: " + fixed(outcome->statistic, 6),
        };
        doc.summary = std::vector<std::string>{
            std::string(kSummaryMarker),
            " p-value: " + fixed(outcome->p_value, 6),
            " verdict: " + std::string(verdict_name(outcome->verdict)),
        };
    }
    return render_doc(doc);
}

std::string execute_job(BatteryKind battery, std::uint64_t proc, const GeneratorSpec& gen, double started_s) {
    const auto meta = job_meta(battery, proc, gen, started_s);
    std::optional<TestOutcome> outcome;
    if (job_has_body(battery, proc)) {
        outcome = run_single_test(battery, static_cast<int>(proc), gen);
    }
    return render_job_output(outcome, meta);
}

std::string render_doc(const JobOutputDoc& doc) {
    std::string out;
    append_lines(out, doc.header);
    append_lines(out, doc.body);
    if (doc.summary) append_lines(out, *doc.summary);
    return out;
}

JobOutputDoc parse_job_output(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.size() < kHeaderLines) {
        throw ParseError("job output has " + std::to_string(lines.size()) + " lines, fewer than 6");
    }
    JobOutputDoc doc;
    std::size_t pos = 0;
    if (is_banner(lines.front())) {
        doc.header.assign(lines.begin(), lines.begin() + kHeaderLines);
        pos = kHeaderLines;
        if (pos == lines.size()) return doc;
    }
    std::size_t summary_at = lines.size();
    for (std::size_t i = pos; i < lines.size(); ++i) {
        if (starts_with(lines[i], kSummaryMarker)) {
            summary_at = i;
            break;
        }
    }
    if (summary_at == lines.size()) throw ParseError("missing summary");
    doc.body.assign(lines.begin() + static_cast<std::ptrdiff_t>(pos),
                    lines.begin() + static_cast<std::ptrdiff_t>(summary_at));
    doc.summary.emplace(lines.begin() + static_cast<std::ptrdiff_t>(summary_at), lines.end());
    return doc;
}

StitchedText stitch_documents(BatteryKind battery, const std::vector<std::string>& job_texts) {
    const auto& spec = battery_spec(battery);
    if (job_texts.size() != static_cast<std::size_t>(spec.job_count)) {
        throw ParseError("expected " + std::to_string(spec.job_count) + " job outputs, got " +
                         std::to_string(job_texts.size()));
    }
    StitchedText out;
    const auto first = parse_job_output(job_texts.front());
    if (first.header.empty()) throw ParseError("output.0 has no header");
    append_lines(out.results, first.header);

    if (battery == BatteryKind::SmallCrush) {
        // Job 0 loses its header; every other SmallCrush output is appended whole.
        append_lines(out.results, first.body);
        if (first.summary) append_lines(out.results, *first.summary);
        for (std::size_t j = 1; j < job_texts.size(); ++j) out.results += job_texts[j];
        out.jobs_stitched = job_texts.size();
        return out;
    }

    for (std::size_t j = 1; j < job_texts.size(); ++j) {
        const auto doc = parse_job_output(job_texts[j]);
        if (!doc.summary) throw ParseError("output." + std::to_string(j) + ": missing summary");
        append_lines(out.results, doc.body);
        out.stats += std::to_string(j) + "\n";
        append_lines(out.stats, *doc.summary);
        out.stats += "\n";
        ++out.jobs_stitched;
    }
    return out;
}

StitchReport stitch_results(const fs::path& dir, BatteryKind battery, const fs::path& dest, std::ostream& progress) {
    const auto& spec = battery_spec(battery);
    std::vector<fs::path> inputs;
    for (int i = 0; i < spec.job_count; ++i) {
        auto path = dir / ("output." + std::to_string(i));
        if (!fs::is_regular_file(path)) throw IoError("missing output file for job " + std::to_string(i));
        inputs.push_back(std::move(path));
    }

    StitchReport report;
    report.dest_dir = dest;
    std::error_code ec;
    if (fs::is_directory(dest)) {
        progress << "directory exists\n";
    } else {
        fs::create_directories(dest, ec);
        if (ec) throw IoError("cannot create " + dest.string() + ": " + ec.message());
        report.dest_created = true;
    }

    report.results_path = dir / "results.txt";
    report.stats_path = dir / "stats.txt";
    fs::remove(report.results_path, ec);
    fs::remove(report.stats_path, ec);

    std::vector<std::string> texts;
    texts.reserve(inputs.size());
    for (const auto& p : inputs) texts.push_back(read_file(p));
    const auto stitched = stitch_documents(battery, texts);
    write_file(report.results_path, stitched.results);
    write_file(report.stats_path, stitched.stats);
    report.jobs_stitched = stitched.jobs_stitched;

    for (int counter = first_stitched_job(battery); counter < spec.job_count; ++counter) {
        if (counter % 10 == 0) progress << "\n";
        progress << counter << " ";
    }
    progress << "\n";

    std::vector<fs::path> outputs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && starts_with(entry.path().filename().string(), "output.")) {
            outputs.push_back(entry.path());
        }
    }
    for (const auto& p : outputs) move_file(p, dest / p.filename());
    fs::copy_file(report.results_path, dest / "results.txt", fs::copy_options::overwrite_existing);
    fs::copy_file(report.stats_path, dest / "stats.txt", fs::copy_options::overwrite_existing);
    if (fs::exists(dir / "log")) move_file(dir / "log", dest / "log");
    return report;
}

}  // namespace crushpool
