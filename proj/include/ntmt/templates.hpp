#pragma once

// Templates, aperiodicity and the asymptotic correlation between two
// template tests.
//
// Notation: a template is written as a bit string whose LEFTMOST character is
// bit 1, the first bit compared against a block window. Internally the pattern
// is an m-bit integer with bit 1 in the most significant position, so
// "100000000" has value 256. Some other tools store templates reversed; this
// library never does.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ntmt/error.hpp"

namespace ntmt {

inline constexpr unsigned min_template_length = 2;
inline constexpr unsigned max_template_length = 24;

class Template {
public:
    constexpr Template() = default;

    constexpr Template(std::uint32_t pattern, unsigned m) : pattern_(pattern), m_(m) {
        if (m < min_template_length || m > max_template_length)
            throw error(errc::unsupported_length, "template length " + std::to_string(m) +
                                                      " outside [2, 24]");
        if (pattern >> m != 0) throw error(errc::contract, "template pattern wider than m bits");
    }

    static Template parse(std::string_view text) {
        if (text.size() < min_template_length || text.size() > max_template_length)
            throw error(errc::unsupported_length,
                        "template '" + std::string(text) + "' must have 2..24 bits");
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] != '0' && text[i] != '1')
                throw error(errc::malformed_input, "template '" + std::string(text) +
                                                       "' has a non-binary character at position " +
                                                       std::to_string(i + 1));
            v = (v << 1) | static_cast<std::uint32_t>(text[i] - '0');
        }
        return {v, static_cast<unsigned>(text.size())};
    }

    constexpr std::uint32_t pattern() const noexcept { return pattern_; }
    constexpr unsigned length() const noexcept { return m_; }

    /// T_[s,t] as an integer, 1-based inclusive.
    constexpr std::uint32_t slice(unsigned s, unsigned t) const noexcept {
        const unsigned w = t - s + 1;
        return (pattern_ >> (m_ - t)) & ((std::uint32_t{1} << w) - 1);
    }

    std::string str() const {
        std::string s(m_, '0');
        for (unsigned i = 0; i < m_; ++i)
            if ((pattern_ >> (m_ - 1 - i)) & 1u) s[i] = '1';
        return s;
    }

    friend constexpr bool operator==(const Template&, const Template&) = default;
    friend constexpr auto operator<=>(const Template&, const Template&) = default;

private:
    std::uint32_t pattern_ = 0;
    unsigned m_ = 0;
};

/// No proper prefix equals the same-length suffix: T_[1+k,m] != T_[1,m-k] for k = 1..m-1.
constexpr bool is_aperiodic(const Template& t) noexcept {
    const unsigned m = t.length();
    for (unsigned k = 1; k < m; ++k)
        if (t.slice(1 + k, m) == t.slice(1, m - k)) return false;
    return true;
}

/// All aperiodic m-bit templates in ascending numeric order.
inline std::vector<Template> enumerate_aperiodic(unsigned m) {
    if (m < min_template_length || m > max_template_length)
        throw error(errc::unsupported_length, "template length " + std::to_string(m) +
                                                  " outside [2, 24]");
    std::vector<Template> out;
    const std::uint32_t count = std::uint32_t{1} << m;
    for (std::uint32_t v = 0; v < count; ++v) {
        const Template t(v, m);
        if (is_aperiodic(t)) out.push_back(t);
    }
    return out;
}

/// Overlap indicators e_k for k = -(m-1)..-1, 1..m-1.
class OverlapProfile {
public:
    OverlapProfile(const Template& t1, const Template& t2) : m_(t1.length()) {
        if (t1.length() != t2.length())
            throw error(errc::length_mismatch, "templates " + t1.str() + " and " + t2.str() +
                                                   " differ in length");
        for (unsigned k = 1; k < m_; ++k) {
            e_[index(static_cast<int>(k))] = t1.slice(1, m_ - k) == t2.slice(1 + k, m_);
            e_[index(-static_cast<int>(k))] = t1.slice(1 + k, m_) == t2.slice(1, m_ - k);
        }
    }

    unsigned length() const noexcept { return m_; }

    /// e_k; k = 0 or |k| >= m reads as 0.
    unsigned at(int k) const noexcept {
        if (k == 0 || k >= static_cast<int>(m_) || k <= -static_cast<int>(m_)) return 0;
        return e_[index(k)];
    }

private:
    static std::size_t index(int k) noexcept {
        return static_cast<std::size_t>(k + static_cast<int>(max_template_length));
    }

    unsigned m_;
    std::array<std::uint8_t, 2 * max_template_length + 1> e_{};
};

inline OverlapProfile overlap_profile(const Template& t1, const Template& t2) { return {t1, t2}; }

/// The correlation as an exact ratio of integers.
struct Ratio {
    std::int64_t num;
    std::int64_t den;
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Asymptotic (M -> infinity) correlation between standardized block counts:
///   (-2m + 1 + sum_{k=1}^{m-1} 2^{m-k} (e_k + e_{-k})) / (2^m - 2m + 1).
inline Ratio correlation_ratio(const Template& t1, const Template& t2) {
    if (t1.length() != t2.length())
        throw error(errc::length_mismatch, "templates " + t1.str() + " and " + t2.str() +
                                               " differ in length");
    if (t1 == t2) throw error(errc::invalid_pair, "correlation needs two distinct templates");
    if (!is_aperiodic(t1)) throw error(errc::invalid_template, t1.str() + " is not aperiodic");
    if (!is_aperiodic(t2)) throw error(errc::invalid_template, t2.str() + " is not aperiodic");
    const OverlapProfile e(t1, t2);
    const std::int64_t m = t1.length();
    std::int64_t num = -2 * m + 1;
    for (int k = 1; k < m; ++k)
        num += (std::int64_t{1} << (m - k)) * (e.at(k) + e.at(-k));
    return {num, (std::int64_t{1} << m) - 2 * m + 1};
}

inline double correlation(const Template& t1, const Template& t2) {
    return correlation_ratio(t1, t2).value();
}

struct CorrelationMatrix {
    std::vector<Template> templates;
    Eigen::MatrixXd entries;

    std::size_t dim() const noexcept { return templates.size(); }
};

inline CorrelationMatrix correlation_matrix(std::vector<Template> templates) {
    const auto R = static_cast<Eigen::Index>(templates.size());
    CorrelationMatrix out{std::move(templates), Eigen::MatrixXd::Identity(R, R)};
    for (Eigen::Index k = 0; k < R; ++k) {
        for (Eigen::Index l = k + 1; l < R; ++l) {
            const double rho = correlation(out.templates[k], out.templates[l]);
            out.entries(k, l) = rho;
            out.entries(l, k) = rho;
        }
    }
    return out;
}

/// The templates dropped from the m = 9 set to obtain a full-rank battery.
inline std::array<Template, 3> default_removed_templates() {
    return {Template::parse("100000000"), Template::parse("111111110"),
            Template::parse("001010101")};
}

/// The 148 aperiodic 9-bit templates minus 100000000, 111111110 and 001010101.
inline std::vector<Template> default_battery(unsigned m = 9) {
    if (m != 9)
        throw error(errc::unsupported_length, "the default battery is defined for m = 9 only");
    auto all = enumerate_aperiodic(9);
    const auto removed = default_removed_templates();
    std::erase_if(all, [&](const Template& t) {
        return std::find(removed.begin(), removed.end(), t) != removed.end();
    });
    return all;
}

} // namespace ntmt
