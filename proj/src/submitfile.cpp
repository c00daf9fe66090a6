#include "crushpool/submitfile.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "crushpool/battery.hpp"
#include "crushpool/errors.hpp"

namespace crushpool {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

[[noreturn]] void fail_at(std::size_t line_no, const std::string& what) {
    throw ParseError("submit file line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::size_t SubmitDescription::job_count() const {
    std::size_t n = 0;
    for (const auto& s : stanzas) n += s.queue_count;
    return n;
}

std::string generate_submit(std::string_view executable, std::string_view battery) {
    const auto& spec = battery_spec(battery);
    SubmitDescription desc;
    desc.executable = std::string(executable);
    for (int counter = 0; counter < spec.job_count; ++counter) {
        desc.stanzas.push_back({std::to_string(counter) + " " + std::to_string(spec.battery_code), 1});
    }
    return render_submit(desc);
}

std::string render_submit(const SubmitDescription& desc) {
    std::ostringstream os;
    os << "Universe = " << desc.universe << "\n";
    os << "Executable = " << desc.executable << "\n";
    os << "Log = " << desc.log_name << "\n";
    os << "Output = " << desc.output_template << "\n";
    for (const auto& [key, value] : desc.extra) {
        os << key << " = " << value << "\n";
    }
    os << "\n";
    for (const auto& stanza : desc.stanzas) {
        os << "Arguments = " << stanza.arguments << "\n";
        if (stanza.queue_count == 1) {
            os << "Queue\n";
        } else {
            os << "Queue " << stanza.queue_count << "\n";
        }
        os << "\n";
    }
    return os.str();
}

SubmitDescription parse_submit(std::string_view text) {
    SubmitDescription desc;
    desc.universe.clear();
    desc.log_name.clear();
    desc.output_template.clear();
    bool have_executable = false;
    std::string arguments;

    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view raw = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        const auto first_space = line.find_first_of(" \t");
        const auto head = line.substr(0, first_space);
        if (iequals(head, "queue")) {
            if (!have_executable) fail_at(line_no, "Queue before any Executable line");
            std::uint32_t count = 1;
            if (first_space != std::string_view::npos) {
                const auto rest = trim(line.substr(first_space));
                const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), count);
                if (ec != std::errc{} || ptr != rest.data() + rest.size() || count == 0) {
                    fail_at(line_no, "bad queue count '" + std::string(rest) + "'");
                }
            }
            desc.stanzas.push_back({arguments, count});
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail_at(line_no, "expected 'Key = value' or 'Queue'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) fail_at(line_no, "empty key");

        if (iequals(key, "universe")) {
            desc.universe = std::string(value);
        } else if (iequals(key, "executable")) {
            desc.executable = std::string(value);
            have_executable = true;
        } else if (iequals(key, "log")) {
            desc.log_name = std::string(value);
        } else if (iequals(key, "output")) {
            desc.output_template = std::string(value);
        } else if (iequals(key, "arguments")) {
            arguments = std::string(value);
        } else {
            desc.extra.emplace_back(std::string(key), std::string(value));
        }
    }
    if (!have_executable) throw ParseError("submit file has no Executable line");
    return desc;
}

std::string expand_output_name(std::string_view output_template, std::uint64_t proc) {
    static constexpr std::string_view kPlaceholder = "$(Process)";
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = output_template.find(kPlaceholder, pos);
        out.append(output_template.substr(pos, hit - pos));
        if (hit == std::string_view::npos) break;
        out += std::to_string(proc);
        pos = hit + kPlaceholder.size();
    }
    return out;
}

std::string format_submit_ack(std::uint64_t jobs, ClusterId cluster) {
    return std::to_string(jobs) + " job(s) submitted to cluster " + std::to_string(cluster.value) + ".";
}

ClusterId parse_cluster_id(std::string_view text) {
    static constexpr std::string_view kWord = "cluster";
    for (auto pos = text.find(kWord); pos != std::string_view::npos; pos = text.find(kWord, pos + 1)) {
        auto i = pos + kWord.size();
        const auto ws_start = i;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == ws_start) continue;
        const auto tok_start = i;
        while (i < text.size() && is_word_char(text[i])) ++i;
        if (i == tok_start) continue;
        const auto token = text.substr(tok_start, i - tok_start);
        std::uint64_t value = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc{} || ptr != token.data() + token.size() || value == 0) {
            throw ParseError("cluster token '" + std::string(token) + "' is not a positive integer");
        }
        return ClusterId{value};
    }
    throw ParseError("no cluster id in submit output");
}

}  // namespace crushpool
