#pragma once

// Packed bit sequences, file ingestion and block partitioning.
//
// Public positions are 1-based: bit(1) is the first bit of the sequence and
// substr(s, t) holds the t - s + 1 bits from s to t inclusive.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntmt/error.hpp"

namespace ntmt {

enum class bit_order { msb_first, lsb_first };

class BitSequence {
public:
    BitSequence() = default;

    explicit BitSequence(std::size_t n) : words_((n + 63) / 64, 0), size_(n) {}

    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }

    /// 1-based access.
    unsigned bit(std::size_t i) const noexcept { return get0(i - 1); }

    void set(std::size_t i, unsigned value) noexcept { set0(i - 1, value); }

    void push_back(unsigned value) {
        if (size_ % 64 == 0) words_.push_back(0);
        ++size_;
        set0(size_ - 1, value);
    }

    /// X_[s,t], 1-based inclusive. Requires 1 <= s, t <= size(); s > t yields empty.
    BitSequence substr(std::size_t s, std::size_t t) const {
        if (s > t) return {};
        if (s == 0 || t > size_) throw error(errc::contract, "substring bounds outside sequence");
        BitSequence out(t - s + 1);
        const std::size_t len = t - s + 1;
        const std::size_t off = s - 1;
        for (std::size_t w = 0; w < out.words_.size(); ++w) {
            out.words_[w] = extract64(off + w * 64);
        }
        out.clear_tail(len);
        return out;
    }

    /// The `width` bits starting at 0-based offset `pos` as an integer whose most
    /// significant bit is the earliest sequence bit. Requires width <= 32.
    std::uint32_t window0(std::size_t pos, unsigned width) const noexcept {
        return static_cast<std::uint32_t>(extract64(pos) >> (64 - width));
    }

    std::span<const std::uint64_t> words() const noexcept { return words_; }

    /// Pack into octets, padding the final octet with zero bits.
    std::vector<std::uint8_t> to_bytes(bit_order order = bit_order::msb_first) const {
        std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
        for (std::size_t i = 0; i < size_; ++i) {
            if (!get0(i)) continue;
            const unsigned shift = order == bit_order::msb_first ? 7 - (i % 8) : i % 8;
            out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | (1u << shift));
        }
        return out;
    }

    std::string to_ascii() const {
        std::string s(size_, '0');
        for (std::size_t i = 0; i < size_; ++i)
            if (get0(i)) s[i] = '1';
        return s;
    }

    friend bool operator==(const BitSequence& a, const BitSequence& b) noexcept {
        return a.size_ == b.size_ && a.words_ == b.words_;
    }

    /// Takes ownership of packed words; bit 0 is the MSB of words[0].
    static BitSequence from_words(std::vector<std::uint64_t> words, std::size_t n) {
        if (words.size() * 64 < n) throw error(errc::contract, "word buffer shorter than bit count");
        BitSequence s;
        words.resize((n + 63) / 64);
        s.words_ = std::move(words);
        s.size_ = n;
        s.clear_tail(n);
        return s;
    }

private:
    unsigned get0(std::size_t i) const noexcept {
        return static_cast<unsigned>((words_[i >> 6] >> (63 - (i & 63))) & 1u);
    }

    void set0(std::size_t i, unsigned value) noexcept {
        const std::uint64_t m = std::uint64_t{1} << (63 - (i & 63));
        if (value)
            words_[i >> 6] |= m;
        else
            words_[i >> 6] &= ~m;
    }

    // 64 bits starting at 0-based position pos; bits past the end read as zero.
    std::uint64_t extract64(std::size_t pos) const noexcept {
        const std::size_t w = pos >> 6;
        const unsigned sh = pos & 63;
        const std::uint64_t hi = w < words_.size() ? words_[w] : 0;
        if (sh == 0) return hi;
        const std::uint64_t lo = w + 1 < words_.size() ? words_[w + 1] : 0;
        return (hi << sh) | (lo >> (64 - sh));
    }

    void clear_tail(std::size_t n) noexcept {
        if (n % 64 != 0 && !words_.empty()) words_.back() &= ~std::uint64_t{0} << (64 - n % 64);
    }

    std::vector<std::uint64_t> words_;
    std::size_t size_ = 0;
};

/// Parse '0'/'1' text; whitespace is skipped.
inline BitSequence from_ascii(std::string_view text) {
    BitSequence seq;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '0' || c == '1') {
            seq.push_back(c == '1');
        } else if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\v' && c != '\f') {
            throw error(errc::malformed_input,
                        "unexpected character at position " + std::to_string(i + 1));
        }
    }
    return seq;
}

inline BitSequence from_bytes(std::span<const std::uint8_t> bytes,
                              bit_order order = bit_order::msb_first) {
    BitSequence seq(bytes.size() * 8);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        for (unsigned b = 0; b < 8; ++b) {
            const unsigned shift = order == bit_order::msb_first ? 7 - b : b;
            seq.set(i * 8 + b + 1, (bytes[i] >> shift) & 1u);
        }
    }
    return seq;
}

struct BlockSet {
    std::vector<BitSequence> blocks;
    std::size_t N = 0;
    std::size_t M = 0;
};

/// Split into N consecutive blocks of M = floor(n/N) bits; trailing bits are dropped.
inline BlockSet partition(const BitSequence& seq, std::size_t N) {
    if (N == 0) throw error(errc::domain, "block count must be positive");
    const std::size_t M = seq.size() / N;
    if (M == 0)
        throw error(errc::sequence_too_short, std::to_string(seq.size()) + " bits cannot form " +
                                                  std::to_string(N) + " non-empty blocks");
    BlockSet out;
    out.N = N;
    out.M = M;
    out.blocks.reserve(N);
    for (std::size_t j = 0; j < N; ++j) out.blocks.push_back(seq.substr(j * M + 1, (j + 1) * M));
    return out;
}

// ---- file ingestion ------------------------------------------------------

enum class file_format { ascii, raw };

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw error(errc::io, "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline BitSequence read_bits(const std::string& path, file_format fmt,
                             bit_order order = bit_order::msb_first) {
    const auto bytes = read_file_bytes(path);
    if (fmt == file_format::raw) return from_bytes(bytes, order);
    try {
        return from_ascii(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const error& e) {
        throw error(e.code(), "'" + path + "': " + e.what());
    }
}

inline void write_bits(const std::string& path, const BitSequence& seq, file_format fmt,
                       bit_order order = bit_order::msb_first) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error(errc::io, "cannot write '" + path + "'");
    if (fmt == file_format::ascii) {
        out << seq.to_ascii() << '\n';
    } else {
        const auto bytes = seq.to_bytes(order);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
}

} // namespace ntmt
