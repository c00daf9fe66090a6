#include "crushpool/battery.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <sstream>

#include "crushpool/errors.hpp"
#include "crushpool/stat_tests.hpp"

namespace crushpool {

namespace {

constexpr std::uint64_t kSmallLimit = std::uint64_t{1} << 16;
constexpr std::uint64_t kCrushLimit = std::uint64_t{1} << 18;
constexpr std::uint64_t kBigLimit = std::uint64_t{1} << 20;

std::string describe(TestFamily family, const TestParams& p) {
    std::ostringstream os;
    os << family_name(family);
    switch (family) {
        case TestFamily::MonobitFrequency:
        case TestFamily::Runs:
            os << " n=" << p.n << " r=" << p.r << " s=" << p.s;
            break;
        case TestFamily::BlockFrequency:
            os << " n=" << p.n << " r=" << p.r << " s=" << p.s << " m=" << p.m;
            break;
        case TestFamily::Gap:
            os << " n=" << p.n << " a=" << p.a << "/256 b=" << p.b << "/256 t=" << p.t;
            break;
        case TestFamily::SerialPairs:
            os << " n=" << p.n << " t=" << p.t << " d=" << p.d;
            break;
        case TestFamily::BirthdaySpacings:
            os << " n=" << p.n << " reps=" << p.reps << " t=" << p.t << " s=" << p.s;
            break;
        case TestFamily::CollisionTest:
            os << " n=" << p.n << " t=" << p.t << " s=" << p.s;
            break;
        case TestFamily::MaxOfT:
            os << " n=" << p.n << " t=" << p.t << " d=" << p.d;
            break;
    }
    return os.str();
}

// ---- parameter builders, each sized against a word limit ----

TestParams bits_params(std::uint64_t limit, std::uint32_t r, std::uint32_t s) {
    TestParams p;
    p.n = limit;
    p.r = r;
    p.s = s;
    return p;
}

TestParams block_params(std::uint64_t limit, std::uint32_t r, std::uint32_t s, std::uint64_t m) {
    TestParams p = bits_params(limit, r, s);
    p.m = m;
    return p;
}

// Largest cutoff keeping every expected category count >= 10.
TestParams gap_params(std::uint64_t limit, std::uint32_t a, std::uint32_t b, std::uint64_t gaps) {
    TestParams p;
    p.a = a;
    p.b = b;
    p.n = gaps;
    p.m = limit;
    const double hit = (b - a) / 256.0;
    std::uint32_t cutoff = 1;
    while (cutoff < 256) {
        const double last = static_cast<double>(gaps) * stat_tests::gap_category_probability(hit, cutoff + 1, cutoff);
        const double tail = static_cast<double>(gaps) * stat_tests::gap_category_probability(hit, cutoff + 1, cutoff + 1);
        if (last < 10.0 || tail < 10.0) break;
        ++cutoff;
    }
    p.t = cutoff;
    return p;
}

TestParams serial_params(std::uint64_t limit, std::uint32_t t, std::uint64_t d) {
    TestParams p;
    p.t = t;
    p.d = d;
    p.n = (limit / t) * t;
    return p;
}

TestParams birthday_params(std::uint64_t limit, std::uint64_t n, std::uint32_t t, std::uint32_t s) {
    TestParams p;
    p.n = n;
    p.t = t;
    p.s = s;
    p.reps = limit / (n * t);
    return p;
}

TestParams collision_params(std::uint64_t limit, std::uint32_t t, double target_mean) {
    TestParams p;
    p.t = t;
    p.n = limit / t;
    const double n = static_cast<double>(p.n);
    const double total_bits = std::round(std::log2(n * n / (2.0 * target_mean)));
    p.s = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(total_bits) / t);
    return p;
}

TestParams max_params(std::uint64_t limit, std::uint32_t t, std::uint64_t d) {
    TestParams p;
    p.t = t;
    p.d = d;
    p.n = limit / t;
    return p;
}

bool sound(TestFamily family, const TestParams& p, std::uint64_t limit) {
    switch (family) {
        case TestFamily::BlockFrequency:
            return p.m % p.s == 0 && p.n * p.s / p.m >= 1;
        case TestFamily::SerialPairs: {
            const double cells = std::pow(static_cast<double>(p.d), p.t);
            return (static_cast<double>(p.n / p.t) / cells) >= 5.0 && cells <= (1 << 22);
        }
        case TestFamily::BirthdaySpacings:
            return p.reps >= 1 && p.t * p.s <= 62 && stat_tests::birthday_lambda(p) >= 16.0;
        case TestFamily::CollisionTest: {
            if (p.t * p.s > 62) return false;
            const double k = std::ldexp(1.0, static_cast<int>(p.t * p.s));
            const double mean = stat_tests::expected_collisions(static_cast<double>(p.n), k);
            return mean >= 20.0 && mean <= 4000.0 && static_cast<double>(p.n) / k <= 1.0 / 16.0;
        }
        case TestFamily::MaxOfT:
            return p.n / p.d >= 5;
        case TestFamily::Gap:
            return p.t >= 2;
        default:
            return p.n <= limit;
    }
}

using Variant = std::function<TestParams(std::uint64_t)>;

// Variant lists per family, in the order they enter a battery. The rotation
// draws one variant per family per round, so the lattice-sensitive t = 3
// variants sit near the front of their lists.
std::vector<std::pair<TestFamily, std::vector<Variant>>> variant_lists() {
    std::vector<std::pair<TestFamily, std::vector<Variant>>> lists;

    std::vector<Variant> monobit;
    std::vector<Variant> runs_v;
    for (const std::uint32_t s : {32u, 8u, 16u, 4u}) {
        for (std::uint32_t r = 0; r + s <= 32; r += s) {
            monobit.push_back([=](std::uint64_t l) { return bits_params(l, r, s); });
            runs_v.push_back([=](std::uint64_t l) { return bits_params(l, r, s); });
        }
    }

    std::vector<Variant> birthday;
    const std::array<std::array<std::uint32_t, 3>, 16> bday = {{
        {512, 3, 8}, {512, 2, 12}, {1024, 3, 9}, {512, 4, 6},
        {2048, 3, 10}, {512, 6, 4}, {1024, 2, 13}, {512, 8, 3},
        {1024, 9, 3}, {2048, 2, 15}, {512, 12, 2}, {1024, 1, 27},
        {2048, 5, 6}, {512, 1, 24}, {2048, 6, 5}, {1024, 2, 14},
    }};
    for (const auto& [n, t, s] : bday) {
        birthday.push_back([=](std::uint64_t l) { return birthday_params(l, n, t, s); });
    }

    std::vector<Variant> coll;
    for (const double mean : {128.0, 512.0}) {
        for (std::uint32_t t = 1; t <= 8; ++t) {
            coll.push_back([=](std::uint64_t l) { return collision_params(l, t, mean); });
        }
    }

    std::vector<Variant> gaps;
    const std::array<std::array<std::uint32_t, 2>, 16> intervals = {{
        {0, 32}, {128, 192}, {224, 256}, {0, 128}, {64, 80}, {192, 200},
        {32, 48}, {96, 104}, {0, 8}, {248, 256}, {16, 48}, {100, 164},
        {200, 216}, {40, 56}, {8, 136}, {176, 184},
    }};
    for (const auto& [a, b] : intervals) {
        gaps.push_back([=](std::uint64_t l) {
            // Expected word use is half the budget.
            const auto count = static_cast<std::uint64_t>(static_cast<double>(l / 2) * (b - a) / 256.0);
            return gap_params(l, a, b, count);
        });
    }

    std::vector<Variant> serial;
    const std::array<std::array<std::uint32_t, 2>, 19> tuples = {{
        {3, 32}, {2, 64}, {3, 16}, {2, 128}, {4, 8}, {2, 256}, {3, 8},
        {2, 32}, {5, 4}, {6, 4}, {8, 2}, {10, 2}, {12, 2}, {4, 16},
        {2, 16}, {3, 4}, {4, 4}, {2, 8}, {14, 2},
    }};
    for (const auto& [t, d] : tuples) {
        serial.push_back([=](std::uint64_t l) { return serial_params(l, t, d); });
    }

    std::vector<Variant> maxes;
    for (const std::uint64_t d : {64ull, 32ull}) {
        for (const std::uint32_t t : {2u, 3u, 4u, 6u, 8u, 12u, 16u, 24u, 32u}) {
            maxes.push_back([=](std::uint64_t l) { return max_params(l, t, d); });
        }
    }

    std::vector<Variant> blocks;
    for (const std::uint64_t m : {128ull, 256ull, 64ull, 512ull, 1024ull, 32ull, 2048ull}) {
        blocks.push_back([=](std::uint64_t l) { return block_params(l, 0, 32, m); });
        blocks.push_back([=](std::uint64_t l) { return block_params(l, 8, 16, m); });
    }

    lists.emplace_back(TestFamily::MonobitFrequency, std::move(monobit));
    lists.emplace_back(TestFamily::BirthdaySpacings, std::move(birthday));
    lists.emplace_back(TestFamily::CollisionTest, std::move(coll));
    lists.emplace_back(TestFamily::Gap, std::move(gaps));
    lists.emplace_back(TestFamily::SerialPairs, std::move(serial));
    lists.emplace_back(TestFamily::MaxOfT, std::move(maxes));
    lists.emplace_back(TestFamily::BlockFrequency, std::move(blocks));
    lists.emplace_back(TestFamily::Runs, std::move(runs_v));
    return lists;
}

std::vector<TestSpec> rotated_tests(std::uint64_t limit, int count) {
    auto lists = variant_lists();
    std::vector<std::vector<TestParams>> usable(lists.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
        for (const auto& make : lists[f].second) {
            const TestParams p = make(limit);
            const bool seen = std::find(usable[f].begin(), usable[f].end(), p) != usable[f].end();
            if (!seen && sound(lists[f].first, p, limit)) usable[f].push_back(p);
        }
    }
    std::vector<TestSpec> tests;
    for (std::size_t round = 0; static_cast<int>(tests.size()) < count; ++round) {
        bool any = false;
        for (std::size_t f = 0; f < lists.size() && static_cast<int>(tests.size()) < count; ++f) {
            if (round >= usable[f].size()) continue;
            any = true;
            TestSpec t;
            t.index = static_cast<int>(tests.size()) + 1;
            t.family = lists[f].first;
            t.params = usable[f][round];
            t.name = describe(t.family, t.params);
            tests.push_back(std::move(t));
        }
        if (!any) break;
    }
    return tests;
}

std::vector<TestSpec> small_crush_tests() {
    const std::uint64_t l = kSmallLimit;
    const std::vector<std::pair<TestFamily, TestParams>> table = {
        {TestFamily::MonobitFrequency, bits_params(l, 0, 32)},
        {TestFamily::BirthdaySpacings, birthday_params(l, 512, 2, 12)},
        {TestFamily::CollisionTest, collision_params(l, 1, 128.0)},
        {TestFamily::Gap, gap_params(l, 0, 32, 4096)},
        {TestFamily::SerialPairs, serial_params(l, 2, 64)},
        {TestFamily::MaxOfT, max_params(l, 8, 64)},
        {TestFamily::BlockFrequency, block_params(l, 0, 32, 256)},
        {TestFamily::Runs, bits_params(l, 0, 32)},
        {TestFamily::SerialPairs, serial_params(l, 3, 16)},
        {TestFamily::Gap, gap_params(l, 128, 192, 8192)},
    };
    std::vector<TestSpec> tests;
    for (const auto& [family, params] : table) {
        TestSpec t;
        t.index = static_cast<int>(tests.size()) + 1;
        t.family = family;
        t.params = params;
        t.name = describe(family, params);
        tests.push_back(std::move(t));
    }
    return tests;
}

BatterySpec make_spec(BatteryKind kind) {
    switch (kind) {
        case BatteryKind::SmallCrush:
            return {kind, "SmallCrush", 10, 0, 11, kSmallLimit, small_crush_tests()};
        case BatteryKind::Crush:
            return {kind, "Crush", 96, 1, 97, kCrushLimit, rotated_tests(kCrushLimit, 96)};
        case BatteryKind::BigCrush:
            return {kind, "BigCrush", 106, 2, 107, kBigLimit, rotated_tests(kBigLimit, 106)};
    }
    throw UsageError("unknown battery kind");
}

}  // namespace

Verdict classify_p_value(double p) {
    if (p < kFailThreshold || p > 1.0 - kFailThreshold) return Verdict::Fail;
    if (p < kSuspectThreshold || p > 1.0 - kSuspectThreshold) return Verdict::Suspect;
    return Verdict::Pass;
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Suspect: return "SUSPECT";
        case Verdict::Fail: return "FAIL";
    }
    return "?";
}

std::string_view family_name(TestFamily f) {
    switch (f) {
        case TestFamily::MonobitFrequency: return "MonobitFrequency";
        case TestFamily::BlockFrequency: return "BlockFrequency";
        case TestFamily::Runs: return "Runs";
        case TestFamily::Gap: return "Gap";
        case TestFamily::SerialPairs: return "SerialPairs";
        case TestFamily::BirthdaySpacings: return "BirthdaySpacings";
        case TestFamily::CollisionTest: return "CollisionTest";
        case TestFamily::MaxOfT: return "MaxOfT";
    }
    return "?";
}

BatteryKind parse_battery(std::string_view name) {
    if (name == "SmallCrush" || name == "smallcrush") return BatteryKind::SmallCrush;
    if (name == "Crush" || name == "crush") return BatteryKind::Crush;
    if (name == "BigCrush" || name == "bigcrush") return BatteryKind::BigCrush;
    throw UsageError("unknown battery '" + std::string(name) +
                     "' (valid: SmallCrush, smallcrush, Crush, crush, BigCrush, bigcrush)");
}

BatteryKind battery_from_code(int code) {
    switch (code) {
        case 0: return BatteryKind::SmallCrush;
        case 1: return BatteryKind::Crush;
        case 2: return BatteryKind::BigCrush;
        default: throw UsageError("unknown battery code " + std::to_string(code) + " (valid: 0, 1, 2)");
    }
}

std::string_view battery_name(BatteryKind kind) {
    return battery_spec(kind).name;
}

const BatterySpec& battery_spec(BatteryKind kind) {
    static const std::array<BatterySpec, 3> specs = {
        make_spec(BatteryKind::SmallCrush),
        make_spec(BatteryKind::Crush),
        make_spec(BatteryKind::BigCrush),
    };
    return specs[static_cast<std::size_t>(kind)];
}

const BatterySpec& battery_spec(std::string_view name) {
    return battery_spec(parse_battery(name));
}

int resolve_test_index(BatteryKind kind, int test_index) {
    const auto& spec = battery_spec(kind);
    if (kind == BatteryKind::SmallCrush && test_index == 0) return 1;
    if (test_index < 1 || test_index > spec.test_count) {
        const int low = kind == BatteryKind::SmallCrush ? 0 : 1;
        throw UsageError("index out of range " + std::to_string(low) + ".." + std::to_string(spec.test_count));
    }
    return test_index;
}

TestOutcome run_test(const TestSpec& test, Generator& gen) {
    const auto raw = stat_tests::run_family(test.family, gen, test.params);
    TestOutcome out;
    out.index = test.index;
    out.name = test.name;
    out.statistic = raw.statistic;
    out.p_value = raw.p_value;
    out.verdict = classify_p_value(raw.p_value);
    out.samples_used = raw.samples_used;
    return out;
}

TestOutcome run_single_test(BatteryKind kind, int test_index, const GeneratorSpec& gen) {
    const int resolved = resolve_test_index(kind, test_index);
    auto instance = make_generator(gen, static_cast<std::uint64_t>(resolved));
    return run_test(battery_spec(kind).test(resolved), instance);
}

std::vector<TestOutcome> run_sequential(BatteryKind kind, const GeneratorSpec& gen) {
    const auto& spec = battery_spec(kind);
    std::vector<TestOutcome> out;
    out.reserve(spec.tests.size());
    for (int i = 1; i <= spec.test_count; ++i) {
        out.push_back(run_single_test(kind, i, gen));
    }
    return out;
}

std::vector<TestOutcome> run_parallel(BatteryKind kind, const GeneratorSpec& gen) {
    const auto& spec = battery_spec(kind);
    const int count = spec.test_count;
    std::vector<TestOutcome> out(static_cast<std::size_t>(count));
    // Construct the first instance up front so a bad byte-stream path throws
    // here instead of inside the parallel region.
    (void)make_generator(gen, 1);
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 1; i <= count; ++i) {
        out[static_cast<std::size_t>(i - 1)] = run_single_test(kind, i, gen);
    }
    return out;
}

}  // namespace crushpool
