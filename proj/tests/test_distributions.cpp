#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "crushpool/distributions.hpp"
#include "crushpool/errors.hpp"
#include "support.hpp"

using namespace crushpool;
using crushpool::testing::chi_square_tail_by_integration;
using crushpool::testing::poisson_upper_by_sum;

TEST(ChiSquare, MatchesNumericIntegrationOracle) {
    double worst = 0.0;
    for (int dof = 1; dof <= 50; ++dof) {
        for (double x = 0.0; x <= 100.0; x += 0.5) {
            const double got = p_value_chi_square(x, static_cast<std::uint64_t>(dof));
            const double want = chi_square_tail_by_integration(x, dof);
            worst = std::max(worst, std::abs(got - want));
            ASSERT_NEAR(got, want, 1e-6) << "dof " << dof << " statistic " << x;
        }
    }
    RecordProperty("worst_abs_error", std::to_string(worst));
}

TEST(ChiSquare, StandardQuantile) {
    EXPECT_NEAR(p_value_chi_square(3.841, 1), 0.05, 5e-4);
    EXPECT_NEAR(chi_square_tail_by_integration(3.841, 1), 0.05, 5e-4);
}

TEST(ChiSquare, ZeroAndLimits) {
    for (std::uint64_t k : {1u, 2u, 7u, 63u}) EXPECT_DOUBLE_EQ(p_value_chi_square(0.0, k), 1.0);
    EXPECT_EQ(p_value_chi_square(1e6, 3), 0.0);
}

TEST(ChiSquare, MonotoneInStatistic) {
    for (std::uint64_t k : {1u, 4u, 30u, 255u}) {
        double prev = 1.0;
        for (double x = 0.0; x < 600.0; x += 0.25) {
            const double p = p_value_chi_square(x, k);
            ASSERT_LE(p, prev + 1e-15);
            ASSERT_GE(p, 0.0);
            prev = p;
        }
    }
}

TEST(ChiSquare, RejectsBadInput) {
    EXPECT_THROW(p_value_chi_square(std::numeric_limits<double>::quiet_NaN(), 3), ComputationError);
    EXPECT_THROW(p_value_chi_square(std::numeric_limits<double>::infinity(), 3), ComputationError);
    EXPECT_THROW(p_value_chi_square(-1.0, 3), ComputationError);
    EXPECT_THROW(p_value_chi_square(1.0, 0), ComputationError);
}

TEST(Poisson, UpperTailMatchesDirectSum) {
    for (double mean : {0.5, 3.0, 16.0, 47.5}) {
        for (unsigned k = 0; k < 120; ++k) {
            ASSERT_NEAR(p_value_poisson_upper(k, mean), poisson_upper_by_sum(k, mean), 1e-9)
                << "k " << k << " mean " << mean;
        }
    }
    EXPECT_DOUBLE_EQ(p_value_poisson_upper(0, 4.0), 1.0);
}

TEST(Gamma, LogGammaAgreesWithStdlib) {
    for (double x = 0.05; x < 200.0; x *= 1.37) EXPECT_NEAR(log_gamma(x), std::lgamma(x), 1e-10 * std::max(1.0, std::abs(std::lgamma(x))));
}

TEST(Gamma, LowerAndUpperAreComplementary) {
    for (double a : {0.5, 1.0, 2.5, 10.0, 40.0}) {
        for (double x : {0.1, 1.0, 5.0, 20.0, 80.0}) EXPECT_NEAR(gamma_p(a, x) + gamma_q(a, x), 1.0, 1e-12);
    }
}
