#include "crushpool/stat_tests.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include "crushpool/distributions.hpp"

namespace crushpool::stat_tests {

namespace {

// Top `s` bits after dropping the top `r` bits of a word.
inline std::uint32_t extract_bits(std::uint32_t w, std::uint32_t r, std::uint32_t s) {
    const std::uint64_t shifted = (static_cast<std::uint64_t>(w) << r) & 0xFFFFFFFFULL;
    return static_cast<std::uint32_t>(shifted >> (32 - s));
}

// t words of s bits each, concatenated into one cell index.
inline std::uint64_t next_cell(Generator& gen, std::uint32_t t, std::uint32_t s) {
    std::uint64_t cell = 0;
    for (std::uint32_t i = 0; i < t; ++i) {
        cell = (cell << s) | extract_bits(gen.next_word(), 0, s);
    }
    return cell;
}

double chi_square(const std::vector<std::uint64_t>& observed, const std::vector<double>& expected) {
    double sum = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double diff = static_cast<double>(observed[i]) - expected[i];
        sum += diff * diff / expected[i];
    }
    return sum;
}

double chi_square_uniform(const std::vector<std::uint64_t>& observed, double total) {
    const double e = total / static_cast<double>(observed.size());
    double sum = 0.0;
    for (const auto o : observed) {
        const double diff = static_cast<double>(o) - e;
        sum += diff * diff;
    }
    return sum / e;
}

std::uint64_t count_adjacent_equal(std::vector<std::uint64_t>& values) {
    std::sort(values.begin(), values.end());
    std::uint64_t equal = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] == values[i - 1]) ++equal;
    }
    return equal;
}

}  // namespace

RawResult monobit_frequency(Generator& gen, const TestParams& p) {
    std::uint64_t ones = 0;
    for (std::uint64_t i = 0; i < p.n; ++i) {
        ones += static_cast<std::uint64_t>(std::popcount(extract_bits(gen.next_word(), p.r, p.s)));
    }
    const double bits = static_cast<double>(p.n) * p.s;
    const double sum = 2.0 * static_cast<double>(ones) - bits;
    const double stat = sum * sum / bits;
    return {stat, p_value_chi_square(stat, 1), p.n};
}

RawResult block_frequency(Generator& gen, const TestParams& p) {
    const std::uint64_t words_per_block = p.m / p.s;
    const std::uint64_t blocks = p.n / words_per_block;
    double stat = 0.0;
    for (std::uint64_t b = 0; b < blocks; ++b) {
        std::uint64_t ones = 0;
        for (std::uint64_t i = 0; i < words_per_block; ++i) {
            ones += static_cast<std::uint64_t>(std::popcount(extract_bits(gen.next_word(), p.r, p.s)));
        }
        const double diff = 2.0 * static_cast<double>(ones) - static_cast<double>(p.m);
        stat += diff * diff / static_cast<double>(p.m);
    }
    return {stat, p_value_chi_square(stat, blocks), blocks * words_per_block};
}

RawResult runs(Generator& gen, const TestParams& p) {
    // Transitions between adjacent bits; Binomial(N - 1, 1/2) under the null.
    const std::uint32_t inner_mask = p.s == 1 ? 0u : (p.s == 32 ? 0x7FFFFFFFu : (1u << (p.s - 1)) - 1u);
    std::uint64_t transitions = 0;
    std::uint32_t prev_last = 0;
    for (std::uint64_t i = 0; i < p.n; ++i) {
        const std::uint32_t x = extract_bits(gen.next_word(), p.r, p.s);
        transitions += static_cast<std::uint64_t>(std::popcount((x ^ (x >> 1)) & inner_mask));
        const std::uint32_t first = x >> (p.s - 1);
        if (i > 0 && first != prev_last) ++transitions;
        prev_last = x & 1u;
    }
    const double pairs = static_cast<double>(p.n) * p.s - 1.0;
    const double z = (2.0 * static_cast<double>(transitions) - pairs) / std::sqrt(pairs);
    const double stat = z * z;
    return {stat, p_value_chi_square(stat, 1), p.n};
}

double gap_category_probability(double hit, std::uint32_t cutoff, std::uint32_t length) {
    if (length >= cutoff) return std::pow(1.0 - hit, cutoff);
    return hit * std::pow(1.0 - hit, length);
}

RawResult gap(Generator& gen, const TestParams& p) {
    const std::uint64_t lo = static_cast<std::uint64_t>(p.a) << 24;
    const std::uint64_t hi = static_cast<std::uint64_t>(p.b) << 24;
    const double hit = static_cast<double>(p.b - p.a) / 256.0;
    std::vector<std::uint64_t> counts(p.t + 1, 0);
    std::uint64_t gaps = 0;
    std::uint64_t length = 0;
    std::uint64_t used = 0;
    while (gaps < p.n && used < p.m) {
        const std::uint64_t w = gen.next_word();
        ++used;
        if (w >= lo && w < hi) {
            ++counts[std::min<std::uint64_t>(length, p.t)];
            ++gaps;
            length = 0;
        } else {
            ++length;
        }
    }
    // Budget exhausted: the missing gaps are all at least as long as the
    // current run, which only happens for grossly defective streams.
    counts[p.t] += p.n - gaps;

    std::vector<double> expected(p.t + 1);
    for (std::uint32_t len = 0; len <= p.t; ++len) {
        expected[len] = static_cast<double>(p.n) * gap_category_probability(hit, p.t, len);
    }
    const double stat = chi_square(counts, expected);
    return {stat, p_value_chi_square(stat, p.t), used};
}

RawResult serial_pairs(Generator& gen, const TestParams& p) {
    const auto bits = static_cast<std::uint32_t>(std::countr_zero(p.d));
    const std::uint64_t cells = std::uint64_t{1} << (bits * p.t);
    const std::uint64_t points = p.n / p.t;
    std::vector<std::uint64_t> counts(cells, 0);
    for (std::uint64_t i = 0; i < points; ++i) {
        ++counts[next_cell(gen, p.t, bits)];
    }
    const double stat = chi_square_uniform(counts, static_cast<double>(points));
    return {stat, p_value_chi_square(stat, cells - 1), points * p.t};
}

double birthday_lambda(const TestParams& p) {
    const double n = static_cast<double>(p.n);
    const double k = std::ldexp(1.0, static_cast<int>(p.t * p.s));
    return static_cast<double>(p.reps) * n * n * n / (4.0 * k);
}

RawResult birthday_spacings(Generator& gen, const TestParams& p) {
    const std::uint64_t k = std::uint64_t{1} << (p.t * p.s);
    std::uint64_t collisions = 0;
    std::vector<std::uint64_t> points(p.n);
    std::vector<std::uint64_t> spacings(p.n);
    for (std::uint64_t rep = 0; rep < p.reps; ++rep) {
        for (auto& pt : points) pt = next_cell(gen, p.t, p.s);
        std::sort(points.begin(), points.end());
        for (std::size_t j = 0; j + 1 < points.size(); ++j) {
            spacings[j] = points[j + 1] - points[j];
        }
        spacings.back() = points.front() + k - points.back();
        collisions += count_adjacent_equal(spacings);
    }
    const double stat = static_cast<double>(collisions);
    return {stat, p_value_poisson_upper(collisions, birthday_lambda(p)), p.reps * p.n * p.t};
}

double expected_collisions(double n, double k) {
    // n - k * (1 - (1 - 1/k)^n), arranged to avoid cancellation.
    return n + k * std::expm1(n * std::log1p(-1.0 / k));
}

RawResult collision(Generator& gen, const TestParams& p) {
    std::vector<std::uint64_t> balls(p.n);
    for (auto& ball : balls) ball = next_cell(gen, p.t, p.s);
    const std::uint64_t c = count_adjacent_equal(balls);
    const double k = std::ldexp(1.0, static_cast<int>(p.t * p.s));
    const double mean = expected_collisions(static_cast<double>(p.n), k);
    return {static_cast<double>(c), p_value_poisson_upper(c, mean), p.n * p.t};
}

RawResult max_of_t(Generator& gen, const TestParams& p) {
    std::vector<std::uint64_t> counts(p.d, 0);
    constexpr double kScale = 1.0 / 4294967296.0;
    for (std::uint64_t g = 0; g < p.n; ++g) {
        std::uint32_t best = 0;
        for (std::uint32_t i = 0; i < p.t; ++i) best = std::max(best, gen.next_word());
        // max of t uniforms has CDF x^t, so max^t is uniform.
        const double u = (static_cast<double>(best) + 0.5) * kScale;
        const double v = std::pow(u, static_cast<double>(p.t));
        const auto bin = std::min<std::uint64_t>(static_cast<std::uint64_t>(v * static_cast<double>(p.d)), p.d - 1);
        ++counts[bin];
    }
    const double stat = chi_square_uniform(counts, static_cast<double>(p.n));
    return {stat, p_value_chi_square(stat, p.d - 1), p.n * p.t};
}

RawResult run_family(TestFamily family, Generator& gen, const TestParams& p) {
    switch (family) {
        case TestFamily::MonobitFrequency: return monobit_frequency(gen, p);
        case TestFamily::BlockFrequency: return block_frequency(gen, p);
        case TestFamily::Runs: return runs(gen, p);
        case TestFamily::Gap: return gap(gen, p);
        case TestFamily::SerialPairs: return serial_pairs(gen, p);
        case TestFamily::BirthdaySpacings: return birthday_spacings(gen, p);
        case TestFamily::CollisionTest: return collision(gen, p);
        case TestFamily::MaxOfT: return max_of_t(gen, p);
    }
    return {};
}

}  // namespace crushpool::stat_tests
