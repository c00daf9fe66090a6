#pragma once

// Test-only helpers: scratch directories and brute-force oracles that share
// no code with the library under test.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crushpool/battery.hpp"
#include "crushpool/stitch.hpp"
#include "crushpool/submitfile.hpp"

namespace crushpool::testing {

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "crushpool-XXXXXX").string();
        if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::vector<std::string> list_dir(const std::filesystem::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

/// Upper-tail chi-square probability by direct quadrature of the density.
/// Substituting t = u^2 removes the t^(k/2-1) singularity at zero, leaving a
/// smooth integrand on [0, sqrt(x)] for composite Simpson.
inline double chi_square_tail_by_integration(double x, int k, int intervals = 20000) {
    if (x <= 0) return 1.0;
    const double half_k = k / 2.0;
    const double log_norm = -half_k * std::log(2.0) - std::lgamma(half_k);
    auto integrand = [&](double u) {
        if (u == 0.0) return k == 1 ? 2.0 * std::exp(log_norm) : 0.0;
        return 2.0 * std::exp(log_norm + (k - 1) * std::log(u) - u * u / 2.0);
    };
    const double b = std::sqrt(x);
    const double h = b / intervals;
    double sum = integrand(0.0) + integrand(b);
    for (int i = 1; i < intervals; ++i) sum += integrand(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    const double cdf = sum * h / 3.0;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
}

/// P(Y >= k) for Y ~ Poisson(mean), by summing the lower pmf terms.
inline double poisson_upper_by_sum(unsigned k, double mean) {
    double term = std::exp(-mean);
    double lower = 0.0;
    for (unsigned j = 0; j < k; ++j) {
        lower += term;
        term *= mean / (j + 1);
    }
    return std::clamp(1.0 - lower, 0.0, 1.0);
}

/// One-sample Kolmogorov-Smirnov test of `values` against Uniform[0,1].
/// p-value from the asymptotic Kolmogorov distribution with Stephens'
/// small-sample correction.
inline double ks_uniform_p_value(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        d = std::max(d, (i + 1) / n - values[i]);
        d = std::max(d, values[i] - i / n);
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
        p += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(p, 0.0, 1.0);
}


inline std::string random_token(std::mt19937_64& rng, std::size_t max_len, bool allow_inner_space) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-/$()@:+,=";
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string out;
    const auto n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (allow_inner_space && i > 0 && i + 1 < n && rng() % 6 == 0) {
            out += ' ';
        } else {
            out += alphabet[pick(rng)];
        }
    }
    return out;
}

inline SubmitDescription random_description(std::mt19937_64& rng) {
    SubmitDescription d;
    d.universe = rng() % 4 == 0 ? "parallel" : "vanilla";
    d.executable = random_token(rng, 24, true);
    d.log_name = random_token(rng, 10, false);
    d.output_template = "out_" + random_token(rng, 6, false) + ".$(Process)";
    const int extras = static_cast<int>(rng() % 3);
    for (int i = 0; i < extras; ++i) {
        std::string key = "Key" + std::to_string(rng() % 1000);
        d.extra.emplace_back(key, random_token(rng, 12, true));
    }
    const int stanzas = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < stanzas; ++i) {
        std::string args = rng() % 10 == 0 ? std::string() : random_token(rng, 16, true);
        d.stanzas.push_back({args, 1 + static_cast<std::uint32_t>(rng() % 3 == 0 ? rng() % 9 : 0)});
    }
    return d;
}


/// A random job document's inputs: an outcome (when the job carries a test)
/// and the header metadata, drawn so every rendered field varies.
struct RandomJob {
    std::optional<TestOutcome> outcome;
    JobMeta meta;
};

inline RandomJob random_job(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const BatteryKind kinds[] = {BatteryKind::SmallCrush, BatteryKind::Crush, BatteryKind::BigCrush};
    const auto kind = kinds[rng() % 3];
    const auto& spec = battery_spec(kind);
    const auto proc = rng() % static_cast<std::uint64_t>(spec.job_count);
    GeneratorSpec g;
    g.kind = static_cast<GeneratorKind>(rng() % 4);
    g.seed = rng();
    RandomJob job;
    job.meta = job_meta(kind, proc, g, std::floor(unit(rng) * 1e6) / 1e3);
    if (job_has_body(kind, proc)) {
        TestOutcome o;
        o.index = resolve_test_index(kind, static_cast<int>(proc));
        o.name = spec.test(o.index).name;
        o.statistic = std::round(unit(rng) * 1e9) / 1e6;
        o.p_value = std::round(unit(rng) * 1e6) / 1e6;
        o.verdict = classify_p_value(o.p_value);
        o.samples_used = rng() % (1u << 20);
        job.outcome = o;
    }
    return job;
}

}  // namespace crushpool::testing
