#pragma once

#include <cstdint>

namespace crushpool {

/// log Gamma(x) for x > 0 (Lanczos, g = 7). Reentrant, unlike std::lgamma.
double log_gamma(double x);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// directly in the tail so tiny values keep their relative precision.
double gamma_q(double a, double x);

/// Upper-tail chi-square probability Q(dof/2, statistic/2). Throws
/// ComputationError on non-finite or negative input.
double p_value_chi_square(double statistic, std::uint64_t dof);

/// P(Y >= observed) for Y ~ Poisson(mean).
double p_value_poisson_upper(std::uint64_t observed, double mean);

}  // namespace crushpool
