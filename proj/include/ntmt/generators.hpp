#pragma once

// Deterministic bit sources for the experiments: MT19937 (words emitted most
// significant bit first) and AES-128 in counter mode (128-bit big-endian
// counter, ciphertext bytes emitted most significant bit first).

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "ntmt/bitstream.hpp"
#include "ntmt/error.hpp"

namespace ntmt {

enum class generator_kind { mt19937, aes128_ctr };

inline const char* to_string(generator_kind k) noexcept {
    return k == generator_kind::mt19937 ? "mt19937" : "aes128_ctr";
}

inline generator_kind parse_generator_kind(const std::string& s) {
    if (s == "mt19937" || s == "mt") return generator_kind::mt19937;
    if (s == "aes128_ctr" || s == "aes") return generator_kind::aes128_ctr;
    throw error(errc::malformed_input, "unknown generator '" + s + "'");
}

using Block128 = std::array<std::uint8_t, 16>;

struct GeneratorSpec {
    generator_kind kind = generator_kind::mt19937;
    std::uint32_t seed = 5489;
    Block128 key{};
    Block128 counter{};

    friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

inline GeneratorSpec mt19937_spec(std::uint32_t seed) { return {generator_kind::mt19937, seed, {}, {}}; }

inline GeneratorSpec aes128_ctr_spec(const Block128& key, const Block128& counter) {
    return {generator_kind::aes128_ctr, 0, key, counter};
}

namespace detail {

struct EvpCtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const noexcept { EVP_CIPHER_CTX_free(c); }
};

inline std::vector<std::uint8_t> aes128_ctr_keystream(const Block128& key, const Block128& counter,
                                                      std::size_t bytes) {
    std::unique_ptr<EVP_CIPHER_CTX, EvpCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(), counter.data()) != 1)
        throw error(errc::contract, "AES-128-CTR initialisation failed");
    std::vector<std::uint8_t> zeros(bytes, 0);
    std::vector<std::uint8_t> out(bytes + 16);
    int len = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, zeros.data(), static_cast<int>(bytes)) != 1)
        throw error(errc::contract, "AES-128-CTR encryption failed");
    out.resize(static_cast<std::size_t>(len));
    return out;
}

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// murmur3 finalizer; a bijection on 32-bit values.
inline std::uint32_t fmix32(std::uint32_t h) noexcept {
    h ^= h >> 16;
    h *= 0x85ebca6bu;
    h ^= h >> 13;
    h *= 0xc2b2ae35u;
    h ^= h >> 16;
    return h;
}

} // namespace detail

/// First n_bits of the stream described by spec.
inline BitSequence generate(const GeneratorSpec& spec, std::size_t n_bits) {
    std::vector<std::uint64_t> words((n_bits + 63) / 64);
    if (spec.kind == generator_kind::mt19937) {
        std::mt19937 mt(spec.seed);
        for (auto& w : words) {
            const std::uint64_t hi = mt();
            const std::uint64_t lo = mt();
            w = (hi << 32) | lo;
        }
    } else {
        const auto ks = detail::aes128_ctr_keystream(spec.key, spec.counter, words.size() * 8);
        for (std::size_t i = 0; i < words.size(); ++i) {
            std::uint64_t w = 0;
            for (std::size_t b = 0; b < 8; ++b) w = (w << 8) | ks[i * 8 + b];
            words[i] = w;
        }
    }
    return BitSequence::from_words(std::move(words), n_bits);
}

/// Per-sequence generator spec. MT19937 seeds are a bijective mix of
/// (base, index), hence distinct for every index below 2^32. AES sequences
/// share one key derived from base and start 2^64 counter blocks apart.
inline GeneratorSpec seed_for_index(generator_kind kind, std::uint64_t base_seed,
                                    std::uint64_t sequence_index) {
    std::uint64_t state = base_seed;
    if (kind == generator_kind::mt19937) {
        const auto salt = static_cast<std::uint32_t>(detail::splitmix64(state));
        return mt19937_spec(detail::fmix32(salt ^ static_cast<std::uint32_t>(sequence_index)));
    }
    Block128 key{};
    const std::uint64_t k0 = detail::splitmix64(state);
    const std::uint64_t k1 = detail::splitmix64(state);
    Block128 counter{};
    for (int b = 0; b < 8; ++b) {
        key[b] = static_cast<std::uint8_t>(k0 >> (56 - 8 * b));
        key[8 + b] = static_cast<std::uint8_t>(k1 >> (56 - 8 * b));
        counter[b] = static_cast<std::uint8_t>(sequence_index >> (56 - 8 * b));
    }
    return aes128_ctr_spec(key, counter);
}

} // namespace ntmt
