#pragma once

// Decorrelation of a template battery.
//
// With Sigma = L D L^T (L orthogonal, D diagonal, descending), the map
// C -> D^{-1/2} L^T C sends standardized block counts with covariance Sigma to
// components with identity covariance. Transformed items are indexed by
// eigen-order, not by template.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ntmt/error.hpp"
#include "ntmt/hash.hpp"
#include "ntmt/matching_test.hpp"
#include "ntmt/specfun.hpp"
#include "ntmt/templates.hpp"

namespace ntmt {

inline constexpr double default_zero_tolerance = 1e-10;

struct EigenDecomposition {
    Eigen::VectorXd eigenvalues;  // descending
    Eigen::MatrixXd eigenvectors; // column k pairs with eigenvalues[k]
};

/// Spectral decomposition of a symmetric matrix. Eigenvalues descend; each
/// eigenvector's largest-magnitude component (first one on ties) is positive.
inline EigenDecomposition eigendecompose(const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols()) throw error(errc::contract, "matrix is not square");
    if (sigma.size() > 0 && (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw error(errc::contract, "matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma);
    if (solver.info() != Eigen::Success) throw error(errc::convergence, "eigensolver did not converge");

    const Eigen::Index n = sigma.rows();
    // Descending; equal eigenvalues keep the solver's order.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return solver.eigenvalues()[a] > solver.eigenvalues()[b];
    });
    EigenDecomposition out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.eigenvalues[k] = solver.eigenvalues()[src];
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        const double peak = v.cwiseAbs().maxCoeff();
        Eigen::Index arg = 0;
        while (std::fabs(v[arg]) < peak - 1e-12) ++arg;
        if (v[arg] < 0.0) v = -v;
        out.eigenvectors.col(k) = v;
    }
    return out;
}

inline EigenDecomposition eigendecompose(const CorrelationMatrix& sigma) {
    return eigendecompose(sigma.entries);
}

struct RankReport {
    std::size_t rank = 0;
    std::vector<double> zero_eigenvalues;
    /// One dependent group per zero eigenvalue.
    std::vector<std::vector<Template>> removable;
};

namespace detail {

// Reduced row echelon form of the rows of B (in place). Used on the null-space
// basis: its RREF is unique, so a null space spanned by disjoint-support
// relations is recovered one relation per row.
inline void rref(Eigen::MatrixXd& B) {
    Eigen::Index pivot_row = 0;
    for (Eigen::Index col = 0; col < B.cols() && pivot_row < B.rows(); ++col) {
        Eigen::Index best = pivot_row;
        for (Eigen::Index r = pivot_row + 1; r < B.rows(); ++r)
            if (std::fabs(B(r, col)) > std::fabs(B(best, col))) best = r;
        if (std::fabs(B(best, col)) < 1e-8) continue;
        B.row(pivot_row).swap(B.row(best));
        B.row(pivot_row) /= B(pivot_row, col);
        for (Eigen::Index r = 0; r < B.rows(); ++r)
            if (r != pivot_row) B.row(r) -= B(r, col) * B.row(pivot_row);
        ++pivot_row;
    }
}

} // namespace detail

/// Eigenvalues below tol * largest count as zero. For each, the templates whose
/// component in the (echelon-reduced, normalized) null-space vector exceeds
/// 1/sqrt(2R) in magnitude form a dependent group.
inline RankReport rank_analysis(const CorrelationMatrix& sigma, double tol = default_zero_tolerance) {
    RankReport out;
    const Eigen::Index R = static_cast<Eigen::Index>(sigma.dim());
    if (R == 0) return out;
    const auto eig = eigendecompose(sigma);
    const double cutoff = tol * eig.eigenvalues[0];
    std::vector<Eigen::Index> zero;
    for (Eigen::Index k = 0; k < R; ++k) {
        if (eig.eigenvalues[k] < cutoff) {
            zero.push_back(k);
            out.zero_eigenvalues.push_back(eig.eigenvalues[k]);
        }
    }
    out.rank = static_cast<std::size_t>(R) - zero.size();
    if (zero.empty()) return out;

    Eigen::MatrixXd basis(static_cast<Eigen::Index>(zero.size()), R);
    for (std::size_t i = 0; i < zero.size(); ++i)
        basis.row(static_cast<Eigen::Index>(i)) = eig.eigenvectors.col(zero[i]).transpose();
    detail::rref(basis);

    const double threshold = 1.0 / std::sqrt(2.0 * static_cast<double>(R));
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
        const double norm = basis.row(i).norm();
        if (norm == 0.0) continue;
        std::vector<Template> group;
        for (Eigen::Index c = 0; c < R; ++c)
            if (std::fabs(basis(i, c)) / norm > threshold) group.push_back(sigma.templates[c]);
        std::sort(group.begin(), group.end());
        out.removable.push_back(std::move(group));
    }
    std::sort(out.removable.begin(), out.removable.end());
    return out;
}

struct WhiteningTransform {
    std::vector<Template> templates;
    Eigen::MatrixXd forward; // R' x R', equals D^{-1/2} L^T
    std::vector<Template> removed;
    double tolerance = default_zero_tolerance;
};

inline std::string describe_groups(const std::vector<std::vector<Template>>& groups) {
    std::string s;
    for (const auto& g : groups) {
        s += s.empty() ? "{" : ", {";
        for (std::size_t i = 0; i < g.size(); ++i) s += (i ? " " : "") + g[i].str();
        s += "}";
    }
    return s;
}

/// Requires a full-rank matrix; remove the templates reported by rank_analysis first.
inline WhiteningTransform build_transform(const CorrelationMatrix& sigma,
                                          double tol = default_zero_tolerance,
                                          std::vector<Template> removed = {}) {
    if (sigma.dim() == 0) throw error(errc::contract, "empty correlation matrix");
    const auto report = rank_analysis(sigma, tol);
    if (report.rank < sigma.dim())
        throw error(errc::singular_matrix,
                    "correlation matrix has rank " + std::to_string(report.rank) + " of " +
                        std::to_string(sigma.dim()) + "; dependent template groups: " +
                        describe_groups(report.removable));
    const auto eig = eigendecompose(sigma);
    const Eigen::VectorXd inv_sqrt = eig.eigenvalues.cwiseSqrt().cwiseInverse();
    return {sigma.templates, inv_sqrt.asDiagonal() * eig.eigenvectors.transpose(), std::move(removed),
            tol};
}

/// The transform over the 145-template m = 9 battery.
inline WhiteningTransform default_transform() {
    const auto removed = default_removed_templates();
    return build_transform(correlation_matrix(default_battery()), default_zero_tolerance,
                           {removed.begin(), removed.end()});
}

struct BatteryResult {
    std::vector<double> item_p_values;
    std::vector<double> raw_p_values;
};

inline void check_transform_templates(std::span<const Template> templates,
                                      const WhiteningTransform& transform) {
    if (!std::equal(templates.begin(), templates.end(), transform.templates.begin(),
                    transform.templates.end()))
        throw error(errc::contract, "template list does not match the transform's templates");
}

/// Whitened and raw p-values from block counts. Row j of the standardized
/// counts maps to C'_j = forward * C_j; item k uses sum_j C'_{j,k}^2.
inline BatteryResult orthogonal_battery(const BlockWindowCounts& hist,
                                        std::span<const Template> templates,
                                        const WhiteningTransform& transform) {
    check_transform_templates(templates, transform);
    const auto C = standardized_counts(hist, templates);
    const Eigen::MatrixXd Cp = C.values * transform.forward.transpose();
    const Dof dof(static_cast<unsigned>(hist.blocks()));
    BatteryResult out;
    out.item_p_values.reserve(templates.size());
    out.raw_p_values.reserve(templates.size());
    for (Eigen::Index k = 0; k < Cp.cols(); ++k) {
        out.item_p_values.push_back(chi2_sf(dof, Cp.col(k).squaredNorm()));
        out.raw_p_values.push_back(chi2_sf(dof, C.values.col(k).squaredNorm()));
    }
    return out;
}

inline BatteryResult orthogonal_battery(const BitSequence& seq, std::span<const Template> templates,
                                        std::size_t N, const WhiteningTransform& transform) {
    check_transform_templates(templates, transform);
    check_battery_templates(templates);
    return orthogonal_battery(BlockWindowCounts(seq, N, templates.front().length()), templates,
                              transform);
}

// ---- serialization ------------------------------------------------------

inline nlohmann::ordered_json to_json(const WhiteningTransform& t) {
    nlohmann::ordered_json j;
    j["templates"] = nlohmann::json::array();
    for (const auto& x : t.templates) j["templates"].push_back(x.str());
    j["removed"] = nlohmann::json::array();
    for (const auto& x : t.removed) j["removed"].push_back(x.str());
    j["tolerance"] = t.tolerance;
    j["forward"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < t.forward.rows(); ++r) {
        std::vector<double> row(t.forward.cols());
        for (Eigen::Index c = 0; c < t.forward.cols(); ++c) row[c] = t.forward(r, c);
        j["forward"].push_back(row);
    }
    return j;
}

inline WhiteningTransform transform_from_json(const nlohmann::json& j) {
    WhiteningTransform t;
    try {
        for (const auto& s : j.at("templates")) t.templates.push_back(Template::parse(s.get<std::string>()));
        for (const auto& s : j.at("removed")) t.removed.push_back(Template::parse(s.get<std::string>()));
        t.tolerance = j.at("tolerance").get<double>();
        const auto& rows = j.at("forward");
        const auto R = static_cast<Eigen::Index>(t.templates.size());
        if (static_cast<Eigen::Index>(rows.size()) != R)
            throw error(errc::malformed_input, "forward matrix row count differs from template count");
        t.forward.resize(R, R);
        for (Eigen::Index r = 0; r < R; ++r) {
            const auto& row = rows[static_cast<std::size_t>(r)];
            if (static_cast<Eigen::Index>(row.size()) != R)
                throw error(errc::malformed_input, "forward matrix is not square");
            for (Eigen::Index c = 0; c < R; ++c) t.forward(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::malformed_input, std::string("transform document: ") + e.what());
    }
    return t;
}

/// Fingerprint of the serialized transform.
inline std::string transform_hash(const WhiteningTransform& t) { return hex64(fnv1a64(to_json(t).dump())); }

} // namespace ntmt
