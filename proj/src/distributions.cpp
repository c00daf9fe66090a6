#include "crushpool/distributions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "crushpool/errors.hpp"

namespace crushpool {

namespace {

constexpr int kMaxIterations = 100000;
constexpr double kEpsilon = 1e-16;
constexpr double kTiny = 1e-300;

// Series for P(a, x); converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIterations; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEpsilon) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz); converges for x >= a + 1.
double gamma_q_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEpsilon) break;
    }
    return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw ComputationError(std::string("non-finite ") + what);
    }
}

}  // namespace

double log_gamma(double x) {
    static constexpr std::array<double, 9> kCoefficients = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double kHalfLogTwoPi = 0.91893853320467274178;
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x); here x > 0.
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    x -= 1.0;
    double sum = kCoefficients[0];
    const double t = x + 7.5;
    for (std::size_t i = 1; i < kCoefficients.size(); ++i) {
        sum += kCoefficients[i] / (x + static_cast<double>(i));
    }
    return kHalfLogTwoPi + (x + 0.5) * std::log(t) - t + std::log(sum);
}

double gamma_p(double a, double x) {
    require_finite(a, "gamma shape");
    require_finite(x, "gamma argument");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
    require_finite(a, "gamma shape");
    require_finite(x, "gamma argument");
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_fraction(a, x);
}

double p_value_chi_square(double statistic, std::uint64_t dof) {
    require_finite(statistic, "chi-square statistic");
    if (statistic < 0.0) throw ComputationError("negative chi-square statistic");
    if (dof == 0) throw ComputationError("chi-square needs dof >= 1");
    const double q = gamma_q(0.5 * static_cast<double>(dof), 0.5 * statistic);
    return std::clamp(q, 0.0, 1.0);
}

double p_value_poisson_upper(std::uint64_t observed, double mean) {
    require_finite(mean, "poisson mean");
    if (mean <= 0.0) return observed == 0 ? 1.0 : 0.0;
    if (observed == 0) return 1.0;
    // P(Y >= k) = P(k, mean), the regularized lower incomplete gamma.
    return std::clamp(gamma_p(static_cast<double>(observed), mean), 0.0, 1.0);
}

}  // namespace crushpool
