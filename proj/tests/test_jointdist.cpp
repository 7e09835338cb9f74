#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "ntmt/jointdist.hpp"
#include "ntmt/stats.hpp"

using namespace ntmt;

namespace {

JointParams params(double rho, unsigned N = 8) {
    JointParams p;
    p.N = N;
    p.rho = rho;
    return p;
}

// Reference values from 10^7 numpy draws of (sum x_j^2, sum y_j^2), N = 8.
struct McReference {
    double rho;
    double cdf_8_8;
    double tail_half_half;
    double cell_top_right;
};
constexpr std::array<McReference, 3> mc_reference{{
    {0.652525, 0.3897321, 0.3185943, 0.0225916},
    {0.321212, 0.3370001, 0.2656345, 0.0120465},
    {0.5, 0.3604115, 0.2890315, 0.0159922},
}};
constexpr double mc_draws = 1e7;

double mc_tol(double v, double draws) { return 4.0 * std::sqrt(v * (1.0 - v) / draws); }

// Composite Gauss-Legendre (10 nodes per panel) over a rectangle.
template <class F>
double integrate_2d(F f, double a, double b, double c, double d, int panels) {
    static constexpr std::array<double, 5> x{0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                             0.8650633666889845, 0.9739065285171717};
    static constexpr std::array<double, 5> w{0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                             0.1494513491505806, 0.0666713443086881};
    std::vector<double> nodes, weights;
    auto build = [&](double lo, double hi, std::vector<double>& ns, std::vector<double>& ws) {
        const double h = (hi - lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = lo + (p + 0.5) * h;
            for (int i = 0; i < 5; ++i) {
                ns.push_back(mid - 0.5 * h * x[i]);
                ns.push_back(mid + 0.5 * h * x[i]);
                ws.push_back(0.5 * h * w[i]);
                ws.push_back(0.5 * h * w[i]);
            }
        }
    };
    std::vector<double> xn, xw, yn, yw;
    build(a, b, xn, xw);
    build(c, d, yn, yw);
    double sum = 0.0;
    for (std::size_t i = 0; i < xn.size(); ++i)
        for (std::size_t k = 0; k < yn.size(); ++k) sum += xw[i] * yw[k] * f(xn[i], yn[k]);
    return sum;
}

} // namespace

TEST(JointCdf, FactorizesAtZeroCorrelation) {
    const double p44 = 1.0 - std::exp(-4.0) * (1.0 + 4.0 + 8.0 + 32.0 / 3.0);
    EXPECT_NEAR(joint_cdf(params(0.0), 8.0, 8.0), p44 * p44, 1e-13);
    EXPECT_NEAR(joint_cdf(params(0.0), 8.0, 8.0), 0.3209561, 5e-8);
    EXPECT_EQ(joint_cdf_detail(params(0.0), 8.0, 8.0).terms, 1u);
}

TEST(JointCdf, MarginalAtSaturatedArgument) {
    const double p44 = reg_lower_gamma(4.0, 4.0);
    EXPECT_NEAR(joint_cdf(params(0.652525), 8.0, 1e4), p44, 1e-12);
}

TEST(JointCdf, MarginalRecovery) {
    for (double rho : {0.1, 0.321212, 0.652525, 0.95}) {
        const double Y = chi2_sf_inv(Dof(8), 1e-14);
        for (double X : {0.5, 3.0, 8.0, 15.0, 30.0})
            ASSERT_NEAR(joint_cdf(params(rho), X, Y), reg_lower_gamma(4.0, X / 2.0), 1e-10);
    }
}

TEST(JointCdf, AgreesWithMonteCarloReference) {
    for (const auto& ref : mc_reference) {
        const double F = joint_cdf(params(ref.rho), 8.0, 8.0);
        EXPECT_NEAR(F, ref.cdf_8_8, mc_tol(F, mc_draws)) << ref.rho;
    }
}

TEST(JointCdf, AgreesWithLibrarySampler) {
    const auto P = params(0.652525);
    McJointChisqSampler sampler(Dof(8), P.rho, 77);
    const int draws = 1000000;
    int hits = 0;
    for (int i = 0; i < draws; ++i) {
        const auto [X, Y] = sampler.next();
        hits += X <= 8.0 && Y <= 8.0;
    }
    const double F = joint_cdf(P, 8.0, 8.0);
    EXPECT_NEAR(static_cast<double>(hits) / draws, F, mc_tol(F, draws));
}

TEST(JointCdf, SymmetryAndSignInvariance) {
    for (double rho : {0.2, 0.5, 0.652525, 0.9}) {
        for (double X : {1.0, 4.0, 9.0, 17.0})
            for (double Y : {2.0, 8.0, 13.0}) {
                const double f = joint_cdf(params(rho), X, Y);
                ASSERT_NEAR(f, joint_cdf(params(rho), Y, X), 1e-14);
                ASSERT_NEAR(f, joint_cdf(params(-rho), X, Y), 1e-14);
            }
    }
}

TEST(JointCdf, MonotoneAndBounded) {
    const auto P = params(0.652525);
    for (double Y : {2.0, 8.0, 20.0}) {
        double prev = 0.0;
        for (double X = 0.25; X < 40.0; X += 0.25) {
            const double f = joint_cdf(P, X, Y);
            ASSERT_GE(f, prev);
            ASSERT_LE(f, 1.0);
            prev = f;
        }
    }
    EXPECT_EQ(joint_cdf(P, 0.0, 5.0), 0.0);
}

TEST(JointCdf, TruncationSoundness) {
    for (double rho : {0.321212, 0.652525, 0.95}) {
        auto P = params(rho);
        const double base = joint_cdf(P, 7.0, 11.0);
        P.max_terms *= 2;
        EXPECT_LT(std::fabs(joint_cdf(P, 7.0, 11.0) - base), P.eps);
        P.eps = 1e-15;
        EXPECT_LT(std::fabs(joint_cdf(P, 7.0, 11.0) - base), 1e-12);
    }
}

TEST(JointCdf, Errors) {
    EXPECT_THROW(joint_cdf(params(1.0), 1.0, 1.0), error);
    EXPECT_THROW(joint_cdf(params(-1.0), 1.0, 1.0), error);
    EXPECT_THROW(joint_cdf(params(0.9999995), 1.0, 1.0), error);
    EXPECT_THROW(joint_cdf(params(0.5, 7), 1.0, 1.0), error);
    EXPECT_THROW(joint_cdf(params(0.5), -1.0, 1.0), error);
    auto P = params(0.99);
    P.max_terms = 10;
    try {
        joint_cdf(P, 1.0, 1.0);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::convergence);
        EXPECT_NE(std::string(e.what()).find("truncation bound"), std::string::npos);
    }
}

TEST(JointPdf, ProductAtZeroCorrelation) {
    for (double X : {0.5, 4.0, 12.0})
        for (double Y : {1.0, 7.0})
            EXPECT_NEAR(joint_pdf(params(0.0), X, Y), chi2_pdf(Dof(8), X) * chi2_pdf(Dof(8), Y), 1e-16);
}

TEST(JointPdf, Symmetric) {
    for (double X : {0.5, 4.0, 12.0, 40.0})
        for (double Y : {1.0, 7.0, 25.0})
            EXPECT_NEAR(joint_pdf(params(0.7), X, Y), joint_pdf(params(0.7), Y, X),
                        1e-14 * joint_pdf(params(0.7), X, Y));
}

TEST(JointPdf, QuadratureMatchesCdfRectangle) {
    const auto P = params(0.5);
    const auto pdf = [&](double x, double y) { return joint_pdf(P, x, y); };
    const double coarse = integrate_2d(pdf, 2.0, 6.0, 3.0, 9.0, 4);
    const double fine = integrate_2d(pdf, 2.0, 6.0, 3.0, 9.0, 8);
    ASSERT_NEAR(coarse, fine, 1e-10);
    const double rect = joint_cdf(P, 6.0, 9.0) - joint_cdf(P, 2.0, 9.0) - joint_cdf(P, 6.0, 3.0) +
                        joint_cdf(P, 2.0, 3.0);
    EXPECT_NEAR(fine, rect, 1e-6);
}

TEST(JointPdf, Errors) {
    EXPECT_THROW(joint_pdf(params(0.5), 0.0, 1.0), error);
    EXPECT_THROW(joint_pdf(params(1.5), 1.0, 1.0), error);
}

TEST(JointPvalueTail, Examples) {
    EXPECT_NEAR(joint_pvalue_tail(params(0.0), 0.3, 0.4), 0.42, 1e-10);
    EXPECT_EQ(joint_pvalue_tail(params(0.652525), 1.0, 0.2), 0.0);
    EXPECT_EQ(joint_pvalue_tail(params(0.652525), 0.2, 1.0), 0.0);
    const double v = joint_pvalue_tail(params(0.652525), 0.5, 0.5);
    EXPECT_NEAR(v, mc_reference[0].tail_half_half, mc_tol(v, mc_draws));
    EXPECT_THROW(joint_pvalue_tail(params(0.5), 0.0, 0.5), error);
    EXPECT_THROW(joint_pvalue_tail(params(0.5), 0.5, 1.2), error);
}

TEST(CellProbability, IndependentQuadrant) {
    EXPECT_NEAR(cell_probability(params(0.0), 0.0, 0.5, 0.0, 0.5), 0.25, 1e-10);
}

TEST(CellProbability, GridSumsToOne) {
    for (double rho : {0.0, 0.321212, 0.652525}) {
        double total = 0.0;
        for (int i = 0; i < 10; ++i)
            for (int k = 0; k < 10; ++k)
                total += cell_probability(params(rho), i / 10.0, (i + 1) / 10.0, k / 10.0, (k + 1) / 10.0);
        EXPECT_NEAR(total, 1.0, 1e-9) << rho;
        const auto grid = cell_probability_grid(params(rho), 10);
        double g = 0.0;
        for (double c : grid) {
            EXPECT_GE(c, -1e-12);
            g += c;
        }
        EXPECT_NEAR(g, 1.0, 1e-9);
        EXPECT_NEAR(grid[9 * 10 + 9], cell_probability(params(rho), 0.9, 1.0, 0.9, 1.0), 1e-14);
    }
}

TEST(CellProbability, PositiveDependenceOnDiagonal) {
    for (const auto& ref : mc_reference) {
        const double c = cell_probability(params(ref.rho), 0.9, 1.0, 0.9, 1.0);
        EXPECT_GT(c, 0.01);
        EXPECT_NEAR(c, ref.cell_top_right, mc_tol(c, mc_draws)) << ref.rho;
    }
}

TEST(CellProbability, MalformedRectangle) {
    EXPECT_THROW(cell_probability(params(0.2), 0.5, 0.5, 0.0, 1.0), error);
    EXPECT_THROW(cell_probability(params(0.2), 0.0, 1.1, 0.0, 1.0), error);
    EXPECT_THROW(cell_probability(params(0.2), -0.1, 0.5, 0.0, 1.0), error);
}

TEST(Sampler, IndependentWhenUncorrelated) {
    McJointChisqSampler s(Dof(8), 0.0, 5);
    const int draws = 1000000;
    std::vector<double> xs(draws), ys(draws);
    double mean = 0.0;
    for (int i = 0; i < draws; ++i) {
        std::tie(xs[i], ys[i]) = s.next();
        mean += xs[i];
    }
    mean /= draws;
    EXPECT_LT(std::fabs(sample_correlation(xs, ys)), 4.0 / std::sqrt(draws));
    EXPECT_NEAR(mean, 8.0, 4.0 * std::sqrt(16.0 / draws));
}

TEST(Sampler, DeterministicAndValidated) {
    McJointChisqSampler a(Dof(8), 0.4, 9), b(Dof(8), 0.4, 9);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
    EXPECT_THROW(McJointChisqSampler(Dof(8), 1.0, 1), error);
}
