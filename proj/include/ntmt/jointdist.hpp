#pragma once

// Joint law of two correlated chi-square statistics
//   X = sum_j x_j^2,  Y = sum_j y_j^2,  (x_j, y_j) standard bivariate normal with correlation rho,
// and the induced joint law of the two p-values.
//
// The CDF is evaluated as a negative-binomial mixture
//   F(X, Y) = sum_r w_r P(r + N/2, X / (2(1 - rho^2))) P(r + N/2, Y / (2(1 - rho^2))),
//   w_r = rho^{2r} (1 - rho^2)^{N/2} Gamma(r + N/2) / (r! Gamma(N/2)),  sum_r w_r = 1,
// so stopping once the accumulated weight reaches 1 - eps bounds the truncation error by eps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "ntmt/error.hpp"
#include "ntmt/specfun.hpp"

namespace ntmt {

inline constexpr double max_joint_rho = 0.999999;

struct JointParams {
    unsigned N = 8;
    double rho = 0.0;
    double eps = 1e-12;
    std::size_t max_terms = 10000;

    void validate() const {
        if (N < 2 || N % 2 != 0)
            throw error(errc::domain, "joint distribution needs an even N >= 2, got " +
                                          std::to_string(N));
        if (!(std::fabs(rho) < 1.0))
            throw error(errc::domain, "correlation must satisfy |rho| < 1, got " + std::to_string(rho));
        if (std::fabs(rho) > max_joint_rho)
            throw error(errc::domain, "|rho| above " + std::to_string(max_joint_rho) +
                                          " is not supported");
        if (!(eps > 0.0 && eps < 1e-3))
            throw error(errc::domain, "series tolerance must lie in (0, 1e-3)");
        if (max_terms == 0) throw error(errc::domain, "max_terms must be positive");
    }
};

struct JointCdf {
    double value;
    std::size_t terms;
};

namespace detail {

// P(a0 + r, x) for r = 0..count-1. The top value is evaluated once; lower ones
// follow from P(a, x) = P(a + 1, x) + x^a e^{-x} / Gamma(a + 1), which only adds
// nonnegative terms.
inline std::vector<double> lower_gamma_ladder(double a0, double x, std::size_t count) {
    std::vector<double> out(count, 0.0);
    if (x == 0.0) return out;
    if (std::isinf(x)) {
        out.assign(count, 1.0);
        return out;
    }
    double a = a0 + static_cast<double>(count - 1);
    double p = reg_lower_gamma(a, x);
    out[count - 1] = p;
    if (count == 1) return out;
    const double lx = std::log(x);
    // log of x^a e^{-x} / Gamma(a + 1) at a = a_top - 1
    a -= 1.0;
    double log_d = a * lx - x - log_gamma(a + 1.0);
    for (std::size_t i = count - 1; i-- > 0;) {
        p += std::exp(log_d);
        out[i] = std::min(p, 1.0);
        log_d += std::log(a) - lx;
        a -= 1.0;
    }
    return out;
}

inline void check_joint_argument(double v, const char* name) {
    if (!(v >= 0.0))
        throw error(errc::domain, std::string(name) + " must be nonnegative for the joint distribution");
}

} // namespace detail

/// Number of mixture weights needed so that their sum reaches 1 - eps.
inline std::size_t joint_series_terms(const JointParams& params) {
    params.validate();
    const double r2 = params.rho * params.rho;
    const double a0 = 0.5 * params.N;
    double w = std::exp(a0 * std::log1p(-r2));
    double cum = w;
    std::size_t r = 0;
    while (cum < 1.0 - params.eps) {
        if (r + 1 >= params.max_terms) {
            std::ostringstream msg;
            msg << "series did not reach tolerance " << params.eps << " within " << params.max_terms
                << " terms (accumulated weight " << cum << ", truncation bound " << 1.0 - cum << ")";
            throw error(errc::convergence, msg.str());
        }
        w *= r2 * (static_cast<double>(r) + a0) / static_cast<double>(r + 1);
        cum += w;
        ++r;
        if (w == 0.0 && cum < 1.0 - params.eps) {
            // weights underflowed before the tolerance was met
            throw error(errc::convergence, "mixture weights underflowed");
        }
    }
    return r + 1;
}

inline JointCdf joint_cdf_detail(const JointParams& params, double X, double Y) {
    params.validate();
    detail::check_joint_argument(X, "X");
    detail::check_joint_argument(Y, "Y");
    const std::size_t terms = joint_series_terms(params);
    if (X == 0.0 || Y == 0.0) return {0.0, terms};

    const double r2 = params.rho * params.rho;
    const double s = 1.0 - r2;
    const double a0 = 0.5 * params.N;
    const auto px = detail::lower_gamma_ladder(a0, X / (2.0 * s), terms);
    const auto py = detail::lower_gamma_ladder(a0, Y / (2.0 * s), terms);

    double w = std::exp(a0 * std::log1p(-r2));
    double sum = 0.0;
    for (std::size_t r = 0; r < terms; ++r) {
        sum += w * px[r] * py[r];
        w *= r2 * (static_cast<double>(r) + a0) / static_cast<double>(r + 1);
    }
    return {std::clamp(sum, 0.0, 1.0), terms};
}

/// F_{N,rho}(X, Y) = Prob{X_N <= X and Y_N <= Y}.
inline double joint_cdf(const JointParams& params, double X, double Y) {
    return joint_cdf_detail(params, X, Y).value;
}

/// Joint density of (X_N, Y_N):
///   sum_r X^{N/2-1} Y^{N/2-1} e^{-(X+Y)/(2s)} / (2^N Gamma(N/2) s^{N/2} r! Gamma(r+N/2)) z^r,
///   s = 1 - rho^2,  z = rho^2 X Y / (4 s^2).
inline double joint_pdf(const JointParams& params, double X, double Y) {
    params.validate();
    if (!(X > 0.0) || !(Y > 0.0))
        throw error(errc::domain, "joint density needs X > 0 and Y > 0");
    const double r2 = params.rho * params.rho;
    const double s = 1.0 - r2;
    const double a0 = 0.5 * params.N;
    double log_term = (a0 - 1.0) * (std::log(X) + std::log(Y)) - (X + Y) / (2.0 * s) -
                      params.N * std::numbers::ln2 - 2.0 * log_gamma(a0) - a0 * std::log(s);
    if (r2 == 0.0) return std::exp(log_term);

    const double log_z = std::log(r2) + std::log(X) + std::log(Y) - 2.0 * std::log(2.0 * s);
    // running sum scaled by exp(-log_max)
    double log_max = log_term;
    double scaled = 1.0;
    for (std::size_t r = 0;; ++r) {
        const double log_ratio =
            log_z - std::log(static_cast<double>(r + 1)) - std::log(static_cast<double>(r) + a0);
        if (log_ratio < 0.0) {
            const double ratio = std::exp(log_ratio);
            const double tail = std::exp(log_term - log_max) * ratio / (1.0 - ratio);
            if (tail <= params.eps * scaled) break;
        }
        if (r + 1 >= params.max_terms)
            throw error(errc::convergence, "joint density series exceeded max_terms");
        log_term += log_ratio;
        if (log_term > log_max) {
            scaled = scaled * std::exp(log_max - log_term) + 1.0;
            log_max = log_term;
        } else {
            scaled += std::exp(log_term - log_max);
        }
    }
    return std::exp(log_max) * scaled;
}

/// Prob{p1 > P and p2 > P'} = F(chi2(P), chi2(P')) where chi2(P) inverts the upper tail.
inline double joint_pvalue_tail(const JointParams& params, double P, double Pp) {
    params.validate();
    if (!(P > 0.0 && P <= 1.0) || !(Pp > 0.0 && Pp <= 1.0))
        throw error(errc::domain, "p-value thresholds must lie in (0, 1]");
    if (P == 1.0 || Pp == 1.0) return 0.0;
    const Dof dof(params.N);
    return joint_cdf(params, chi2_sf_inv(dof, P), chi2_sf_inv(dof, Pp));
}

namespace detail {

// Prob{p1 > a and p2 > b} with a or b allowed to be 0 (whole axis).
inline double pvalue_tail_closed(const JointParams& params, double a, double b) {
    if (a == 0.0 && b == 0.0) return 1.0;
    if (a == 0.0) return 1.0 - b;
    if (b == 0.0) return 1.0 - a;
    return joint_pvalue_tail(params, a, b);
}

} // namespace detail

/// Prob{p1 in (p1_lo, p1_hi] and p2 in (p2_lo, p2_hi]} by inclusion-exclusion of tails.
inline double cell_probability(const JointParams& params, double p1_lo, double p1_hi, double p2_lo,
                               double p2_hi) {
    params.validate();
    const auto ok = [](double lo, double hi) { return lo >= 0.0 && lo < hi && hi <= 1.0; };
    if (!ok(p1_lo, p1_hi) || !ok(p2_lo, p2_hi))
        throw error(errc::domain, "cell bounds must satisfy 0 <= lo < hi <= 1 on both axes");
    using detail::pvalue_tail_closed;
    return pvalue_tail_closed(params, p1_lo, p2_lo) - pvalue_tail_closed(params, p1_hi, p2_lo) -
           pvalue_tail_closed(params, p1_lo, p2_hi) + pvalue_tail_closed(params, p1_hi, p2_hi);
}

/// G x G cell probabilities on the uniform p-value grid, row-major with row = p1 bin.
/// Bin i covers (i/G, (i+1)/G]. Tails are shared between neighbouring cells.
inline std::vector<double> cell_probability_grid(const JointParams& params, unsigned G) {
    params.validate();
    if (G < 2) throw error(errc::domain, "grid resolution must be at least 2");
    const auto edge = [G](unsigned i) { return static_cast<double>(i) / G; };
    std::vector<double> tail((G + 1) * (G + 1));
    for (unsigned i = 0; i <= G; ++i)
        for (unsigned k = 0; k <= G; ++k)
            tail[i * (G + 1) + k] = detail::pvalue_tail_closed(params, edge(i), edge(k));
    std::vector<double> out(G * G);
    for (unsigned i = 0; i < G; ++i) {
        for (unsigned k = 0; k < G; ++k) {
            const auto t = [&](unsigned a, unsigned b) { return tail[a * (G + 1) + b]; };
            out[i * G + k] = t(i, k) - t(i + 1, k) - t(i, k + 1) + t(i + 1, k + 1);
        }
    }
    return out;
}

/// Simulates (X_N, Y_N) directly from correlated normal pairs. Single owner; not thread-safe.
class McJointChisqSampler {
public:
    McJointChisqSampler(Dof n, double rho, std::uint64_t seed)
        : n_(n.value()), rho_(rho), engine_(seed) {
        if (!(std::fabs(rho) < 1.0))
            throw error(errc::domain, "sampler correlation must satisfy |rho| < 1");
        cond_ = std::sqrt(1.0 - rho * rho);
    }

    std::pair<double, double> next() {
        double X = 0.0;
        double Y = 0.0;
        for (unsigned j = 0; j < n_; ++j) {
            const auto [z1, z2] = normal_pair();
            const double x = z1;
            const double y = rho_ * z1 + cond_ * z2;
            X += x * x;
            Y += y * y;
        }
        return {X, Y};
    }

private:
    // Box-Muller on 53-bit uniforms; fixed arithmetic so streams repeat given the seed.
    std::pair<double, double> normal_pair() {
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    unsigned n_;
    double rho_;
    double cond_;
    std::mt19937_64 engine_;
};

} // namespace ntmt
