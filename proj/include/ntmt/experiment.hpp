#pragma once

// Experiment runners: joint p-value histograms for a template pair and
// rejection-count histograms for a battery, before and after whitening.
//
// Every sequence index gets its own generator stream (seed_for_index), work is
// fanned out over indices and merged in index order, so results never depend
// on the worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ntmt/error.hpp"
#include "ntmt/generators.hpp"
#include "ntmt/hash.hpp"
#include "ntmt/jointdist.hpp"
#include "ntmt/matching_test.hpp"
#include "ntmt/stats.hpp"
#include "ntmt/templates.hpp"
#include "ntmt/whitening.hpp"

namespace ntmt {

struct ExperimentConfig {
    generator_kind generator = generator_kind::mt19937;
    std::size_t sequences = 20000;       // K
    std::size_t bits = 100000;           // n
    unsigned blocks = 8;                 // N
    unsigned grid = 10;                  // G
    double alpha = 0.01;
    std::uint64_t base_seed = 20240601;
    unsigned workers = 0;                // 0: hardware concurrency
    std::vector<Template> templates;     // empty: default battery

    void validate(unsigned m) const {
        if (sequences < 1) throw error(errc::domain, "sequence count must be at least 1");
        if (blocks < 1) throw error(errc::domain, "block count must be at least 1");
        if (bits < static_cast<std::size_t>(blocks) * m)
            throw error(errc::sequence_too_short, "n must be at least N * m bits");
        if (grid < 2) throw error(errc::domain, "grid resolution must be at least 2");
        if (!(alpha > 0.0 && alpha < 1.0)) throw error(errc::domain, "alpha must lie in (0, 1)");
    }

    unsigned worker_count() const {
        if (workers) return workers;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["generator"] = to_string(c.generator);
    j["sequences"] = c.sequences;
    j["bits"] = c.bits;
    j["blocks"] = c.blocks;
    j["grid"] = c.grid;
    j["alpha"] = c.alpha;
    j["base_seed"] = c.base_seed;
    return j;
}

/// Runs fn(i) for i in [0, count) on `workers` threads; results come back in index order.
template <class Result>
std::vector<Result> parallel_map(std::size_t count, unsigned workers,
                                 const std::function<Result(std::size_t)>& fn) {
    std::vector<Result> results(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                results[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
                return;
            }
        }
    };
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
    if (n <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

/// Per-sequence plain p-values: result[i][r] for sequence i and templates[r].
inline std::vector<std::vector<double>> collect_p_values(const ExperimentConfig& config,
                                                         const std::vector<Template>& templates) {
    check_battery_templates(templates);
    config.validate(templates.front().length());
    return parallel_map<std::vector<double>>(config.sequences, config.worker_count(), [&](std::size_t i) {
        const auto seq = generate(seed_for_index(config.generator, config.base_seed, i), config.bits);
        return battery_p_values(BlockWindowCounts(seq, config.blocks, templates.front().length()),
                                templates);
    });
}

/// Bin of a p-value on the grid (i/G, (i+1)/G]; 0 falls in bin 0.
inline unsigned p_value_bin(double p, unsigned G) {
    const double scaled = std::ceil(p * G) - 1.0;
    return static_cast<unsigned>(std::clamp(scaled, 0.0, static_cast<double>(G - 1)));
}

struct JointHistogramReport {
    ExperimentConfig config;
    Template first;
    Template second;
    double rho = 0.0;
    std::vector<std::size_t> counts;  // G x G, row = first template's p-value bin
    std::vector<double> empirical;    // counts / K
    std::vector<double> theoretical;  // cell probabilities
    std::vector<double> residuals;    // (O - E) / sqrt(E)
    GofResult gof;

    double empirical_cell(unsigned i, unsigned k) const { return empirical[i * config.grid + k]; }
};

inline JointHistogramReport joint_histogram_from_p_values(const ExperimentConfig& config,
                                                          const Template& t1, const Template& t2,
                                                          std::span<const double> p1,
                                                          std::span<const double> p2) {
    if (p1.size() != p2.size() || p1.empty())
        throw error(errc::contract, "p-value samples must be non-empty and aligned");
    const unsigned G = config.grid;
    JointHistogramReport rep;
    rep.config = config;
    rep.first = t1;
    rep.second = t2;
    rep.rho = correlation(t1, t2);
    rep.counts.assign(G * G, 0);
    for (std::size_t i = 0; i < p1.size(); ++i)
        ++rep.counts[p_value_bin(p1[i], G) * G + p_value_bin(p2[i], G)];
    const double K = static_cast<double>(p1.size());
    JointParams params;
    params.N = config.blocks;
    params.rho = rep.rho;
    rep.theoretical = cell_probability_grid(params, G);
    std::vector<double> observed(G * G), expected(G * G);
    for (std::size_t c = 0; c < G * G; ++c) {
        observed[c] = static_cast<double>(rep.counts[c]);
        expected[c] = rep.theoretical[c] * K;
        rep.empirical.push_back(observed[c] / K);
        rep.residuals.push_back(expected[c] > 0 ? (observed[c] - expected[c]) / std::sqrt(expected[c]) : 0.0);
    }
    rep.gof = pearson_gof(observed, expected);
    return rep;
}

inline JointHistogramReport run_joint_histogram(const ExperimentConfig& config, const Template& t1,
                                                const Template& t2) {
    if (t1 == t2) throw error(errc::invalid_pair, "joint histogram needs two distinct templates");
    const std::vector<Template> pair{t1, t2};
    const auto p = collect_p_values(config, pair);
    std::vector<double> p1, p2;
    for (const auto& row : p) {
        p1.push_back(row[0]);
        p2.push_back(row[1]);
    }
    return joint_histogram_from_p_values(config, t1, t2, p1, p2);
}

struct RejectionHistogram {
    std::vector<std::size_t> counts;  // counts[r]: sequences rejected by exactly r items
    std::vector<double> expected;     // K * Binomial(R, alpha) pmf
    GofResult gof;
    double mean_rejections = 0.0;
};

struct RejectionReport {
    ExperimentConfig config;
    std::vector<Template> templates;
    std::string template_hash;
    std::string transform_hash;
    RejectionHistogram plain;
    RejectionHistogram orthogonalized;
};

inline RejectionHistogram rejection_histogram(const std::vector<std::size_t>& per_sequence,
                                              std::size_t items, double alpha) {
    RejectionHistogram h;
    h.counts.assign(items + 1, 0);
    double total = 0.0;
    for (const auto r : per_sequence) {
        ++h.counts[r];
        total += static_cast<double>(r);
    }
    const double K = static_cast<double>(per_sequence.size());
    h.mean_rejections = total / K;
    const auto pmf = binomial_pmf(static_cast<unsigned>(items), alpha);
    std::vector<double> observed(items + 1);
    h.expected.resize(items + 1);
    for (std::size_t r = 0; r <= items; ++r) {
        observed[r] = static_cast<double>(h.counts[r]);
        h.expected[r] = K * pmf[r];
    }
    h.gof = pearson_gof(observed, h.expected);
    return h;
}

/// Rejection counts per sequence for the plain and the whitened battery, on the same sequences.
inline RejectionReport run_rejection_experiment(const ExperimentConfig& config,
                                                const WhiteningTransform& transform) {
    const auto& templates = transform.templates;
    check_battery_templates(templates);
    config.validate(templates.front().length());
    struct Counts {
        std::size_t plain = 0;
        std::size_t whitened = 0;
    };
    const auto per = parallel_map<Counts>(config.sequences, config.worker_count(), [&](std::size_t i) {
        const auto seq = generate(seed_for_index(config.generator, config.base_seed, i), config.bits);
        const auto res = orthogonal_battery(
            BlockWindowCounts(seq, config.blocks, templates.front().length()), templates, transform);
        Counts c;
        for (const double p : res.raw_p_values) c.plain += p < config.alpha;
        for (const double p : res.item_p_values) c.whitened += p < config.alpha;
        return c;
    });
    std::vector<std::size_t> plain, whitened;
    for (const auto& c : per) {
        plain.push_back(c.plain);
        whitened.push_back(c.whitened);
    }
    RejectionReport rep;
    rep.config = config;
    rep.templates = templates;
    rep.template_hash = template_list_hash(templates);
    rep.transform_hash = transform_hash(transform);
    rep.plain = rejection_histogram(plain, templates.size(), config.alpha);
    rep.orthogonalized = rejection_histogram(whitened, templates.size(), config.alpha);
    return rep;
}

/// Histogram of one side only. orthogonalize = true uses the default 145-template battery.
inline RejectionHistogram run_rejection_histogram(const ExperimentConfig& config, bool orthogonalize) {
    if (orthogonalize && !config.templates.empty() && config.templates != default_battery())
        throw error(errc::contract, "orthogonalized runs use the default 145-template battery");
    WhiteningTransform transform;
    if (orthogonalize || config.templates.empty()) {
        transform = default_transform();
    } else {
        // The plain side never touches the transform; identity keeps the shared runner usable.
        transform.templates = config.templates;
        const auto R = static_cast<Eigen::Index>(config.templates.size());
        transform.forward = Eigen::MatrixXd::Identity(R, R);
    }
    const auto rep = run_rejection_experiment(config, transform);
    return orthogonalize ? rep.orthogonalized : rep.plain;
}

// ---- report serialization -----------------------------------------------

inline nlohmann::ordered_json to_json(const GofResult& g) {
    nlohmann::ordered_json j;
    j["statistic"] = g.statistic;
    j["dof"] = g.dof;
    j["p_value"] = g.p_value;
    j["groups"] = g.groups;
    return j;
}

inline nlohmann::ordered_json to_json(const JointHistogramReport& r) {
    nlohmann::ordered_json j;
    j["config"] = to_json(r.config);
    j["templates"] = {r.first.str(), r.second.str()};
    j["rho"] = r.rho;
    const unsigned G = r.config.grid;
    auto grid = [G](const auto& flat) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (unsigned i = 0; i < G; ++i)
            rows.push_back(std::vector(flat.begin() + i * G, flat.begin() + (i + 1) * G));
        return rows;
    };
    j["counts"] = grid(r.counts);
    j["empirical"] = grid(r.empirical);
    j["theoretical"] = grid(r.theoretical);
    j["residuals"] = grid(r.residuals);
    j["goodness_of_fit"] = to_json(r.gof);
    return j;
}

inline nlohmann::ordered_json to_json(const RejectionHistogram& h) {
    nlohmann::ordered_json j;
    j["counts"] = h.counts;
    j["expected"] = h.expected;
    j["mean_rejections"] = h.mean_rejections;
    j["goodness_of_fit"] = to_json(h.gof);
    return j;
}

inline nlohmann::ordered_json to_json(const RejectionReport& r) {
    nlohmann::ordered_json j;
    j["config"] = to_json(r.config);
    j["items"] = r.templates.size();
    j["template_hash"] = r.template_hash;
    j["transform_hash"] = r.transform_hash;
    j["expected_mean_rejections"] = r.templates.size() * r.config.alpha;
    j["plain"] = to_json(r.plain);
    j["orthogonalized"] = to_json(r.orthogonalized);
    return j;
}

} // namespace ntmt
