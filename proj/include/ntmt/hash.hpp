#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

#include "ntmt/templates.hpp"

namespace ntmt {

/// 64-bit FNV-1a; used to fingerprint template lists and transforms in reports.
inline std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string template_list_hash(std::span<const Template> templates) {
    std::string joined;
    for (const auto& t : templates) {
        joined += t.str();
        joined += ',';
    }
    return hex64(fnv1a64(joined));
}

} // namespace ntmt
