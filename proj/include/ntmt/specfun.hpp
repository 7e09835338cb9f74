#pragma once

// Regularized incomplete gamma functions and the chi-square tail with its
// inverse.

#include <cmath>
#include <limits>
#include <string>

#include "ntmt/error.hpp"

namespace ntmt {

/// Chi-square degrees of freedom (the block count N). Any N >= 1 is accepted
/// here; the joint distribution additionally requires N even.
class Dof {
public:
    explicit Dof(unsigned n) : n_(n) {
        if (n == 0) throw error(errc::domain, "degrees of freedom must be positive");
    }
    unsigned value() const noexcept { return n_; }
    double half() const noexcept { return 0.5 * n_; }
    bool even() const noexcept { return n_ % 2 == 0; }

private:
    unsigned n_;
};

inline double log_gamma(double a) { return std::lgamma(a); }

namespace detail {

inline constexpr double gamma_eps = 1e-17;
inline constexpr int gamma_max_iter = 100000;

inline void check_gamma_domain(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(a))
        throw error(errc::domain, "incomplete gamma shape must be positive, got " + std::to_string(a));
    if (!(x >= 0.0))
        throw error(errc::domain, "incomplete gamma argument must be nonnegative, got " +
                                      std::to_string(x));
}

// log(x^a e^-x / Gamma(a))
inline double gamma_log_prefix(double a, double x) { return a * std::log(x) - x - log_gamma(a); }

// P(a, x) by the power series; converges quickly for x < a + 1.
inline double lower_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < gamma_max_iter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * gamma_eps) break;
    }
    return sum * std::exp(gamma_log_prefix(a, x));
}

// Q(a, x) by the modified Lentz continued fraction; for x >= a + 1.
inline double upper_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / gamma_eps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < gamma_max_iter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < gamma_eps * 10) break;
    }
    return std::exp(gamma_log_prefix(a, x)) * h;
}

} // namespace detail

/// P(a, x) = gamma(a, x) / Gamma(a).
inline double reg_lower_gamma(double a, double x) {
    detail::check_gamma_domain(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return detail::lower_series(a, x);
    return 1.0 - detail::upper_fraction(a, x);
}

/// Q(a, x) = 1 - P(a, x), evaluated directly so small tails keep relative accuracy.
inline double reg_upper_gamma(double a, double x) {
    detail::check_gamma_domain(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - detail::lower_series(a, x);
    return detail::upper_fraction(a, x);
}

inline double chi2_cdf(Dof n, double x) {
    if (!(x >= 0.0)) throw error(errc::domain, "chi-square statistic must be nonnegative");
    return reg_lower_gamma(n.half(), 0.5 * x);
}

/// Upper-tail p-value of a chi-square statistic.
inline double chi2_sf(Dof n, double x) {
    if (!(x >= 0.0)) throw error(errc::domain, "chi-square statistic must be nonnegative");
    return reg_upper_gamma(n.half(), 0.5 * x);
}

inline double chi2_pdf(Dof n, double x) {
    if (!(x >= 0.0)) throw error(errc::domain, "chi-square statistic must be nonnegative");
    const double k = n.half();
    if (x == 0.0) return n.value() == 2 ? 0.5 : (n.value() < 2 ? INFINITY : 0.0);
    return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - log_gamma(k));
}

/// The statistic x with chi2_sf(n, x) = p. Bisection on a bracket with Newton refinement.
inline double chi2_sf_inv(Dof n, double p) {
    if (!(p > 0.0) || p > 1.0)
        throw error(errc::domain, "chi-square quantile needs p in (0, 1], got " + std::to_string(p));
    if (p == 1.0) return 0.0;

    const double N = n.value();
    const bool use_cdf = p > 0.5;
    const double q = 1.0 - p;
    // Positive when x lies left of the root.
    auto residual = [&](double x) { return use_cdf ? q - chi2_cdf(n, x) : chi2_sf(n, x) - p; };

    double lo = 0.0;
    double hi = N + 40.0 * std::sqrt(2.0 * N) + 40.0 * std::fabs(std::log(p));
    while (residual(hi) > 0.0) hi *= 2.0;

    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        const double r = residual(x);
        if (r == 0.0) return x;
        if (r > 0.0)
            lo = x;
        else
            hi = x;
        const double pdf = chi2_pdf(n, x);
        double next = pdf > 0.0 ? x + r / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-15 * x || hi - lo <= 1e-15 * hi) return next;
        x = next;
    }
    return x;
}

} // namespace ntmt
