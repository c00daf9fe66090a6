#include <gtest/gtest.h>

#include <random>
#include <set>

#include "crushpool/errors.hpp"
#include "crushpool/generators.hpp"
#include "support.hpp"

using namespace crushpool;
using crushpool::testing::TempDir;

namespace {

// Reference xorshift64* step written from its published definition.
std::uint32_t reference_xorshift_word(std::uint64_t& x) {
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    return static_cast<std::uint32_t>((x * 0x2545F4914F6CDD1DULL) >> 32);
}

GeneratorSpec spec_of(GeneratorKind kind, std::uint64_t seed) {
    GeneratorSpec s;
    s.kind = kind;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Generators, ConstantZeroEmitsZeros) {
    auto g = make_generator(spec_of(GeneratorKind::ConstantZero, 99), 5);
    EXPECT_EQ(g.next_words(4), (std::vector<std::uint32_t>{0, 0, 0, 0}));
}

TEST(Generators, MinstdFirstStepIsMultiplier) {
    auto g = Generator::seeded(spec_of(GeneratorKind::Minstd, 0), 1);
    const std::uint64_t expected = (std::uint64_t{16807} << 32) / 2147483647ULL;
    EXPECT_EQ(g.next_word(), expected);
    EXPECT_EQ(lcg_word(16807, 2147483647ULL), expected);
}

TEST(Generators, RanduFirstStepIsMultiplier) {
    auto g = Generator::seeded(spec_of(GeneratorKind::Randu, 0), 1);
    EXPECT_EQ(g.next_word(), static_cast<std::uint32_t>((std::uint64_t{65539} << 32) >> 31));
}

TEST(Generators, LcgZeroSeedIsRemappedToOne) {
    for (auto kind : {GeneratorKind::Minstd, GeneratorKind::Randu}) {
        auto zero = Generator::seeded(spec_of(kind, 0), 0);
        auto one = Generator::seeded(spec_of(kind, 0), 1);
        EXPECT_EQ(zero.next_words(16), one.next_words(16));
    }
}

TEST(Generators, XorshiftMatchesReferenceDefinition) {
    auto g = Generator::seeded(spec_of(GeneratorKind::Xorshift64Star, 0), 42);
    std::uint64_t x = 42;
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(g.next_word(), reference_xorshift_word(x)) << "word " << i;
}

TEST(Generators, SplitMixFinalizerKnownValue) {
    // The first output of SplitMix64 seeded with 0.
    EXPECT_EQ(splitmix64_finalize(0x9E3779B97F4A7C15ULL), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(mix_seed(0, 1), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(mix_seed(7, 0), splitmix64_finalize(7));
}

TEST(Generators, InstancesAreDeterministic) {
    for (auto kind : {GeneratorKind::Minstd, GeneratorKind::Randu, GeneratorKind::Xorshift64Star}) {
        auto a = make_generator(spec_of(kind, 42), 3);
        auto b = make_generator(spec_of(kind, 42), 3);
        EXPECT_EQ(a.next_words(100000), b.next_words(100000));
    }
}

TEST(Generators, JobIndicesDecorrelateFirstWords) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto seed = rng();
        std::set<std::uint32_t> firsts;
        for (std::uint64_t index = 0; index < 107; ++index) {
            firsts.insert(make_generator(spec_of(GeneratorKind::Xorshift64Star, seed), index).next_word());
        }
        EXPECT_EQ(firsts.size(), 107u) << "seed " << seed;
    }
}

TEST(Generators, NextWordsZeroLeavesStateUnchanged) {
    auto a = make_generator(spec_of(GeneratorKind::Xorshift64Star, 9), 1);
    auto b = a;
    EXPECT_TRUE(a.next_words(0).empty());
    EXPECT_EQ(a.next_word(), b.next_word());
}

TEST(Generators, ByteStreamIsLittleEndianAndWraps) {
    TempDir dir;
    const std::vector<std::uint8_t> bytes = {0x01, 0x02, 0x03, 0x04, 0xff, 0x00, 0x00, 0x80, 0x10, 0x20, 0x30, 0x40};
    crushpool::testing::spit(dir / "stream.bin", std::string(bytes.begin(), bytes.end()));
    GeneratorSpec spec;
    spec.kind = GeneratorKind::ByteStreamFile;
    spec.path = dir / "stream.bin";
    for (std::uint64_t index : {0u, 5u}) {
        auto g = make_generator(spec, index);
        EXPECT_EQ(g.next_words(3), (std::vector<std::uint32_t>{0x04030201u, 0x800000ffu, 0x40302010u}));
        EXPECT_EQ(g.next_word(), 0x04030201u);
    }
}

TEST(Generators, ByteStreamWrapsMidWord) {
    TempDir dir;
    crushpool::testing::spit(dir / "odd.bin", std::string("\x01\x02\x03\x04\x05", 5));
    GeneratorSpec spec;
    spec.kind = GeneratorKind::ByteStreamFile;
    spec.path = dir / "odd.bin";
    auto g = make_generator(spec, 0);
    EXPECT_EQ(g.next_word(), 0x04030201u);
    EXPECT_EQ(g.next_word(), 0x03020105u);
}

TEST(Generators, MissingOrEmptyStreamNamesPath) {
    TempDir dir;
    GeneratorSpec spec;
    spec.kind = GeneratorKind::ByteStreamFile;
    spec.path = dir / "absent.bin";
    try {
        (void)make_generator(spec, 0);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("absent.bin"), std::string::npos);
    }
    crushpool::testing::spit(dir / "empty.bin", "");
    spec.path = dir / "empty.bin";
    EXPECT_THROW((void)make_generator(spec, 0), ConfigError);
}

TEST(Generators, NamesAndDescriptorsRoundTrip) {
    for (const char* name : {"minstd", "randu", "xorshift64star", "zero"}) {
        const auto spec = parse_generator_name(name, 77);
        EXPECT_EQ(generator_name(spec), name);
        EXPECT_EQ(parse_generator_descriptor(generator_descriptor(spec)), spec);
    }
    const auto file = parse_generator_name("file:/tmp/x.bin", 5);
    EXPECT_EQ(file.kind, GeneratorKind::ByteStreamFile);
    EXPECT_EQ(file.path, "/tmp/x.bin");
    EXPECT_EQ(parse_generator_descriptor(generator_descriptor(file)).path, file.path);
    EXPECT_THROW(parse_generator_name("mersenne", 1), UsageError);
}
