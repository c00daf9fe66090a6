#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "crushpool/generators.hpp"

namespace crushpool {

enum class BatteryKind { SmallCrush, Crush, BigCrush };

enum class TestFamily {
    MonobitFrequency,
    BlockFrequency,
    Runs,
    Gap,
    SerialPairs,
    BirthdaySpacings,
    CollisionTest,
    MaxOfT,
};

/// Family-specific integers. Unused fields stay zero.
///
///   n      words (Monobit, BlockFrequency, Runs, SerialPairs), gaps to
///          collect (Gap), points per replication (BirthdaySpacings),
///          balls (CollisionTest) or groups (MaxOfT)
///   r, s   bits dropped from the top of each word / bits kept after that
///   m      block length in bits (BlockFrequency), word budget (Gap)
///   t      tuple dimension, or the gap-length cutoff for Gap
///   d      cells per dimension (SerialPairs) or bins (MaxOfT)
///   a, b   Gap interval [a/256, b/256)
///   reps   replications (BirthdaySpacings)
struct TestParams {
    std::uint64_t n = 0;
    std::uint32_t r = 0;
    std::uint32_t s = 32;
    std::uint64_t m = 0;
    std::uint32_t t = 0;
    std::uint64_t d = 0;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint64_t reps = 0;

    bool operator==(const TestParams&) const = default;
};

struct TestSpec {
    int index = 0;
    TestFamily family = TestFamily::MonobitFrequency;
    TestParams params;
    std::string name;
};

struct BatterySpec {
    BatteryKind kind;
    std::string name;
    int test_count;
    int battery_code;
    int job_count;
    std::uint64_t word_limit;
    std::vector<TestSpec> tests;  // tests[i].index == i + 1

    const TestSpec& test(int index) const { return tests.at(static_cast<std::size_t>(index - 1)); }
};

enum class Verdict { Pass, Suspect, Fail };

struct TestOutcome {
    int index = 0;
    std::string name;
    double statistic = 0.0;
    double p_value = 1.0;
    Verdict verdict = Verdict::Pass;
    std::uint64_t samples_used = 0;

    bool operator==(const TestOutcome&) const = default;
};

inline constexpr double kFailThreshold = 1e-10;
inline constexpr double kSuspectThreshold = 1e-3;

Verdict classify_p_value(double p);
std::string_view verdict_name(Verdict v);  // PASS / SUSPECT / FAIL
std::string_view family_name(TestFamily f);

/// Accepts the makesub spellings (SmallCrush/smallcrush, ...). Throws
/// UsageError listing the valid names.
BatteryKind parse_battery(std::string_view name);
BatteryKind battery_from_code(int code);
std::string_view battery_name(BatteryKind kind);

const BatterySpec& battery_spec(BatteryKind kind);
const BatterySpec& battery_spec(std::string_view name);

/// Maps a job's test index to the battery test it runs. SmallCrush job 0
/// runs test 1; every other index maps to itself. Throws UsageError naming
/// the valid range.
int resolve_test_index(BatteryKind kind, int test_index);

/// Runs one test on a caller-provided generator.
TestOutcome run_test(const TestSpec& test, Generator& gen);

/// Per-job entry point: builds a fresh generator for the resolved index.
TestOutcome run_single_test(BatteryKind kind, int test_index, const GeneratorSpec& gen);

/// Serial reference: one fresh generator per test, indices 1..test_count.
std::vector<TestOutcome> run_sequential(BatteryKind kind, const GeneratorSpec& gen);

/// Same result as run_sequential, tests spread over OpenMP threads.
std::vector<TestOutcome> run_parallel(BatteryKind kind, const GeneratorSpec& gen);

}  // namespace crushpool
