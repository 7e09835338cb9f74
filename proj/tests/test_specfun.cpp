#include <cmath>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "ntmt/specfun.hpp"

using namespace ntmt;

namespace {

// e^{-x/2} sum_{j<N/2} (x/2)^j / j!  -- the even-dof chi-square tail.
double poisson_tail(unsigned N, double x) {
    double term = 1.0, sum = 0.0;
    const double h = 0.5 * x;
    for (unsigned j = 0; j < N / 2; ++j) {
        sum += term;
        term *= h / (j + 1);
    }
    return std::exp(-h) * sum;
}

} // namespace

TEST(RegLowerGamma, ClosedForms) {
    EXPECT_EQ(reg_lower_gamma(3.5, 0.0), 0.0);
    EXPECT_NEAR(reg_lower_gamma(1.0, 1.0), 1.0 - std::exp(-1.0), 1e-15);
    const double p44 = 1.0 - std::exp(-4.0) * (1.0 + 4.0 + 8.0 + 32.0 / 3.0);
    EXPECT_NEAR(reg_lower_gamma(4.0, 4.0), p44, 1e-14);
    EXPECT_NEAR(p44, 0.5665299, 5e-8);
}

TEST(RegLowerGamma, DomainErrors) {
    EXPECT_THROW(reg_lower_gamma(0.0, 1.0), error);
    EXPECT_THROW(reg_lower_gamma(-1.0, 1.0), error);
    EXPECT_THROW(reg_lower_gamma(1.0, -0.5), error);
    EXPECT_THROW(reg_upper_gamma(1.0, NAN), error);
}

TEST(RegLowerGamma, AgreesWithBoostAndComplements) {
    for (double a : {0.5, 1.0, 2.5, 4.0, 10.0, 37.5, 150.0, 1000.0}) {
        for (double x : {1e-3, 0.1, 0.9, 1.0, 3.0, 4.0, 9.5, 20.0, 60.0, 140.0, 900.0, 1100.0}) {
            const double P = reg_lower_gamma(a, x);
            const double Q = reg_upper_gamma(a, x);
            ASSERT_NEAR(P, boost::math::gamma_p(a, x), 1e-13) << a << ' ' << x;
            ASSERT_NEAR(Q, boost::math::gamma_q(a, x), 1e-13) << a << ' ' << x;
            ASSERT_NEAR(P + Q, 1.0, 1e-13);
            ASSERT_GE(P, 0.0);
            ASSERT_LE(P, 1.0);
        }
    }
}

TEST(RegUpperGamma, SmallTailsKeepRelativeAccuracy) {
    for (double x : {100.0, 300.0, 600.0}) {
        const double ref = boost::math::gamma_q(4.0, x);
        EXPECT_NEAR(reg_upper_gamma(4.0, x) / ref, 1.0, 1e-11);
    }
}

TEST(Chi2Sf, Examples) {
    EXPECT_EQ(chi2_sf(Dof(8), 0.0), 1.0);
    EXPECT_NEAR(chi2_sf(Dof(8), 8.0), std::exp(-4.0) * (1.0 + 4.0 + 8.0 + 32.0 / 3.0), 1e-14);
    EXPECT_NEAR(chi2_sf(Dof(8), 8.0), 0.4334701, 5e-8);
    EXPECT_NEAR(chi2_sf(Dof(2), 2.0 * std::log(2.0)), 0.5, 1e-15);
    EXPECT_THROW(chi2_sf(Dof(8), -1.0), error);
    EXPECT_THROW(Dof(0), error);
}

TEST(Chi2Sf, OddDofAccepted) {
    EXPECT_NEAR(chi2_sf(Dof(1), 3.841458820694124), 0.05, 1e-12);
}

TEST(Chi2Sf, EvenDofMatchesPoissonSum) {
    for (unsigned N : {2u, 4u, 8u, 16u, 30u})
        for (double x = 0.05; x < 80.0; x *= 1.37) ASSERT_NEAR(chi2_sf(Dof(N), x), poisson_tail(N, x), 1e-12);
}

TEST(Chi2Sf, StrictlyDecreasing) {
    double prev = 1.0;
    for (double x = 0.01; x < 60.0; x += 0.01) {
        const double v = chi2_sf(Dof(8), x);
        ASSERT_LT(v, prev);
        prev = v;
    }
}

TEST(Chi2SfInv, Examples) {
    EXPECT_EQ(chi2_sf_inv(Dof(8), 1.0), 0.0);
    EXPECT_NEAR(chi2_sf_inv(Dof(8), chi2_sf(Dof(8), 8.0)), 8.0, 1e-9);
    EXPECT_NEAR(chi2_sf_inv(Dof(8), 0.4334701), 8.0, 1e-5);
    EXPECT_NEAR(chi2_sf_inv(Dof(2), 0.5), 2.0 * std::log(2.0), 1e-12);
    EXPECT_THROW(chi2_sf_inv(Dof(8), 0.0), error);
    EXPECT_THROW(chi2_sf_inv(Dof(8), 1.5), error);
}

TEST(Chi2SfInv, RoundTripAndMonotone) {
    for (unsigned N : {2u, 4u, 8u, 16u}) {
        double prev = INFINITY;
        for (double p : {1e-14, 1e-6, 1e-4, 0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999}) {
            const double x = chi2_sf_inv(Dof(N), p);
            ASSERT_NEAR(chi2_sf(Dof(N), x), p, 1e-9 * std::max(p, 1e-3)) << N << ' ' << p;
            ASSERT_NEAR(x, 2.0 * boost::math::gamma_q_inv(0.5 * N, p), 1e-10 * x);
            ASSERT_LT(x, prev);
            prev = x;
        }
    }
}
