#pragma once

// Goodness-of-fit helpers used by the experiment harness and the tests.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ntmt/error.hpp"
#include "ntmt/specfun.hpp"

namespace ntmt {

struct KsResult {
    double statistic;
    double p_value; // asymptotic Kolmogorov distribution
};

/// Kolmogorov distribution tail Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}.
inline double kolmogorov_sf(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k < 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
inline KsResult ks_uniform(std::vector<double> samples) {
    if (samples.empty()) throw error(errc::domain, "KS test needs at least one sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = std::clamp(samples[i], 0.0, 1.0);
        d = std::max({d, (i + 1) / n - u, u - i / n});
    }
    const double sn = std::sqrt(n);
    return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

struct GofResult {
    double statistic = 0.0;
    unsigned dof = 0;
    double p_value = 1.0;
    std::size_t groups = 0;
};

/// Pearson chi-square of observed against expected counts. Adjacent bins are
/// pooled in order until each group expects at least min_expected; a short
/// final remainder joins the previous group.
inline GofResult pearson_gof(std::span<const double> observed, std::span<const double> expected,
                             double min_expected = 5.0) {
    if (observed.size() != expected.size() || observed.empty())
        throw error(errc::contract, "observed and expected bins must be non-empty and aligned");
    std::vector<double> obs;
    std::vector<double> exp;
    double o = 0.0;
    double e = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o += observed[i];
        e += expected[i];
        if (e >= min_expected) {
            obs.push_back(o);
            exp.push_back(e);
            o = e = 0.0;
        }
    }
    if (e > 0.0 || o > 0.0) {
        if (exp.empty()) {
            obs.push_back(o);
            exp.push_back(e);
        } else {
            obs.back() += o;
            exp.back() += e;
        }
    }
    GofResult out;
    out.groups = obs.size();
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (exp[i] <= 0.0) {
            if (obs[i] > 0.0) out.statistic = INFINITY;
            continue;
        }
        const double d = obs[i] - exp[i];
        out.statistic += d * d / exp[i];
    }
    if (out.groups < 2) return out;
    out.dof = static_cast<unsigned>(out.groups - 1);
    out.p_value = std::isinf(out.statistic) ? 0.0 : chi2_sf(Dof(out.dof), out.statistic);
    return out;
}

/// Binomial(n, p) probabilities for k = 0..n.
inline std::vector<double> binomial_pmf(unsigned n, double p) {
    if (!(p > 0.0 && p < 1.0)) throw error(errc::domain, "binomial probability must lie in (0, 1)");
    std::vector<double> out(n + 1);
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    for (unsigned k = 0; k <= n; ++k)
        out[k] = std::exp(log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0) + k * lp +
                          (n - k) * lq);
    return out;
}

inline double sample_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw error(errc::contract, "need two aligned samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace ntmt
