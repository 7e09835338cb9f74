#pragma once

#include <stdexcept>
#include <string>

namespace ntmt {

/// Failure categories. The CLI maps these onto process exit codes.
enum class errc {
    malformed_input,
    sequence_too_short,
    block_too_short,
    unsupported_length,
    length_mismatch,
    invalid_template,
    invalid_pair,
    domain,
    convergence,
    singular_matrix,
    contract,
    io,
};

inline const char* to_string(errc c) noexcept {
    switch (c) {
    case errc::malformed_input: return "malformed-input";
    case errc::sequence_too_short: return "sequence-too-short";
    case errc::block_too_short: return "block-too-short";
    case errc::unsupported_length: return "unsupported-length";
    case errc::length_mismatch: return "length-mismatch";
    case errc::invalid_template: return "invalid-template";
    case errc::invalid_pair: return "invalid-pair";
    case errc::domain: return "domain";
    case errc::convergence: return "convergence";
    case errc::singular_matrix: return "singular-matrix";
    case errc::contract: return "contract";
    case errc::io: return "io";
    }
    return "unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

    /// True for numeric failures (domain, convergence, singular); false for bad data.
    bool is_numeric() const noexcept {
        return code_ == errc::domain || code_ == errc::convergence ||
               code_ == errc::singular_matrix;
    }

private:
    errc code_;
};

} // namespace ntmt
