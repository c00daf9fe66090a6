#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace crushpool {

enum class GeneratorKind { Minstd, Randu, Xorshift64Star, ConstantZero, ByteStreamFile };

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::Xorshift64Star;
    std::uint64_t seed = 0;           // ignored for ByteStreamFile
    std::filesystem::path path;       // ByteStreamFile only

    bool operator==(const GeneratorSpec&) const = default;
};

namespace gen_constants {
inline constexpr std::uint64_t kMinstdMultiplier = 16807;
inline constexpr std::uint64_t kMinstdModulus = 2147483647;  // 2^31 - 1
inline constexpr std::uint64_t kRanduMultiplier = 65539;
inline constexpr std::uint64_t kRanduModulus = 2147483648;  // 2^31
inline constexpr std::uint64_t kXorshiftMultiplier = 2685821657736338717ULL;
inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
}  // namespace gen_constants

/// SplitMix64 output finalizer.
std::uint64_t splitmix64_finalize(std::uint64_t z);

/// Effective seed of the instance built for `job_index`:
/// splitmix64_finalize(seed ^ (job_index * golden gamma)).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t job_index);

/// Parses `minstd`, `randu`, `xorshift64star`, `zero` or `file:<path>`.
/// Throws UsageError on anything else.
GeneratorSpec parse_generator_name(std::string_view name, std::uint64_t seed);

/// Canonical CLI name of the generator (`file:<path>` for byte streams).
std::string generator_name(const GeneratorSpec& spec);

/// Executable descriptor used in submit files: the name, plus `@<seed>` for
/// the seeded kinds. `file:` descriptors never carry a seed.
std::string generator_descriptor(const GeneratorSpec& spec);
GeneratorSpec parse_generator_descriptor(std::string_view descriptor);

/// One instance of a generator under test. Single owner; copyable so a test
/// can fork a stream, but never shared across threads.
class Generator {
public:
    /// Instance whose internal state is seeded directly with `effective_seed`
    /// (after the zero-state remap). make_generator is the normal entry point.
    static Generator seeded(const GeneratorSpec& spec, std::uint64_t effective_seed);

    std::uint32_t next_word();
    std::vector<std::uint32_t> next_words(std::size_t n);

    const GeneratorSpec& spec() const noexcept { return spec_; }
    std::uint64_t effective_seed() const noexcept { return effective_seed_; }

private:
    Generator() = default;

    GeneratorSpec spec_;
    std::uint64_t effective_seed_ = 0;
    std::uint64_t state_ = 0;
    std::shared_ptr<const std::vector<std::uint8_t>> bytes_;
    std::size_t offset_ = 0;
};

/// Fresh instance for one job. Byte-stream instances start at offset 0 for
/// every index. Throws ConfigError for a missing or empty byte-stream file.
Generator make_generator(const GeneratorSpec& spec, std::uint64_t job_index);

/// Word emitted by the LCGs for a given state: floor(state * 2^32 / modulus).
std::uint32_t lcg_word(std::uint64_t state, std::uint64_t modulus);

}  // namespace crushpool
