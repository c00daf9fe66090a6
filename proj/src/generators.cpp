#include "crushpool/generators.hpp"

#include <charconv>
#include <fstream>
#include <iterator>

#include "crushpool/errors.hpp"

namespace crushpool {

namespace {

using namespace gen_constants;

constexpr std::string_view kFilePrefix = "file:";

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::shared_ptr<const std::vector<std::uint8_t>> load_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("byte-stream file not readable: " + path.string());
    }
    auto bytes = std::make_shared<std::vector<std::uint8_t>>(std::istreambuf_iterator<char>(in),
                                                             std::istreambuf_iterator<char>());
    if (bytes->empty()) {
        throw ConfigError("byte-stream file is empty: " + path.string());
    }
    return bytes;
}

}  // namespace

std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t job_index) {
    return splitmix64_finalize(seed ^ (job_index * kGoldenGamma));
}

GeneratorSpec parse_generator_name(std::string_view name, std::uint64_t seed) {
    GeneratorSpec spec;
    spec.seed = seed;
    if (name.substr(0, kFilePrefix.size()) == kFilePrefix) {
        spec.kind = GeneratorKind::ByteStreamFile;
        spec.path = std::string(name.substr(kFilePrefix.size()));
        spec.seed = 0;
        if (spec.path.empty()) throw UsageError("file: generator needs a path");
        return spec;
    }
    const auto lowered = to_lower(name);
    if (lowered == "minstd") {
        spec.kind = GeneratorKind::Minstd;
    } else if (lowered == "randu") {
        spec.kind = GeneratorKind::Randu;
    } else if (lowered == "xorshift64star") {
        spec.kind = GeneratorKind::Xorshift64Star;
    } else if (lowered == "zero") {
        spec.kind = GeneratorKind::ConstantZero;
    } else {
        throw UsageError("unknown generator '" + std::string(name) +
                         "' (valid: minstd, randu, xorshift64star, zero, file:<path>)");
    }
    return spec;
}

std::string generator_name(const GeneratorSpec& spec) {
    switch (spec.kind) {
        case GeneratorKind::Minstd: return "minstd";
        case GeneratorKind::Randu: return "randu";
        case GeneratorKind::Xorshift64Star: return "xorshift64star";
        case GeneratorKind::ConstantZero: return "zero";
        case GeneratorKind::ByteStreamFile: return std::string(kFilePrefix) + spec.path.string();
    }
    return "unknown";
}

std::string generator_descriptor(const GeneratorSpec& spec) {
    if (spec.kind == GeneratorKind::ByteStreamFile) return generator_name(spec);
    return generator_name(spec) + "@" + std::to_string(spec.seed);
}

GeneratorSpec parse_generator_descriptor(std::string_view descriptor) {
    if (descriptor.substr(0, kFilePrefix.size()) == kFilePrefix) {
        return parse_generator_name(descriptor, 0);
    }
    const auto at = descriptor.find('@');
    std::uint64_t seed = 0;
    if (at != std::string_view::npos) {
        const auto digits = descriptor.substr(at + 1);
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) {
            throw UsageError("bad seed in executable descriptor '" + std::string(descriptor) + "'");
        }
    }
    return parse_generator_name(descriptor.substr(0, at), seed);
}

std::uint32_t lcg_word(std::uint64_t state, std::uint64_t modulus) {
    return static_cast<std::uint32_t>((state << 32) / modulus);
}

Generator Generator::seeded(const GeneratorSpec& spec, std::uint64_t effective_seed) {
    Generator g;
    g.spec_ = spec;
    switch (spec.kind) {
        case GeneratorKind::Minstd:
            g.state_ = effective_seed % kMinstdModulus;
            if (g.state_ == 0) g.state_ = 1;  // zero is absorbing
            break;
        case GeneratorKind::Randu:
            g.state_ = effective_seed % kRanduModulus;
            if (g.state_ == 0) g.state_ = 1;
            break;
        case GeneratorKind::Xorshift64Star:
            g.state_ = effective_seed == 0 ? kGoldenGamma : effective_seed;
            break;
        case GeneratorKind::ConstantZero:
            g.state_ = 0;
            break;
        case GeneratorKind::ByteStreamFile:
            g.bytes_ = load_bytes(spec.path);
            effective_seed = 0;
            break;
    }
    g.effective_seed_ = effective_seed;
    return g;
}

std::uint32_t Generator::next_word() {
    switch (spec_.kind) {
        case GeneratorKind::Minstd:
            state_ = (state_ * kMinstdMultiplier) % kMinstdModulus;
            return lcg_word(state_, kMinstdModulus);
        case GeneratorKind::Randu:
            state_ = (state_ * kRanduMultiplier) % kRanduModulus;
            return lcg_word(state_, kRanduModulus);
        case GeneratorKind::Xorshift64Star:
            state_ ^= state_ >> 12;
            state_ ^= state_ << 25;
            state_ ^= state_ >> 27;
            return static_cast<std::uint32_t>((state_ * kXorshiftMultiplier) >> 32);
        case GeneratorKind::ConstantZero:
            return 0;
        case GeneratorKind::ByteStreamFile: {
            // Little-endian, wrapping byte-wise at end of file.
            const auto& b = *bytes_;
            std::uint32_t w = 0;
            for (int i = 0; i < 4; ++i) {
                w |= static_cast<std::uint32_t>(b[offset_]) << (8 * i);
                offset_ = (offset_ + 1) % b.size();
            }
            return w;
        }
    }
    return 0;
}

std::vector<std::uint32_t> Generator::next_words(std::size_t n) {
    std::vector<std::uint32_t> out(n);
    for (auto& w : out) w = next_word();
    return out;
}

Generator make_generator(const GeneratorSpec& spec, std::uint64_t job_index) {
    if (spec.kind == GeneratorKind::ByteStreamFile) {
        return Generator::seeded(spec, 0);
    }
    return Generator::seeded(spec, mix_seed(spec.seed, job_index));
}

}  // namespace crushpool
