#pragma once

// Compact MD5 (RFC 1321) used for data-file integrity manifests. Forensic
// provenance checking only; this is not a cryptographic guarantee.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>

namespace campfin::detail {

class Md5 {
public:
    Md5() = default;

    void update(std::span<const unsigned char> data) {
        total_ += data.size();
        std::size_t off = 0;
        if (buffered_ > 0) {
            const std::size_t take = std::min<std::size_t>(64 - buffered_, data.size());
            std::memcpy(buffer_.data() + buffered_, data.data(), take);
            buffered_ += take;
            off += take;
            if (buffered_ == 64) {
                transform(buffer_.data());
                buffered_ = 0;
            }
        }
        while (off + 64 <= data.size()) {
            transform(data.data() + off);
            off += 64;
        }
        if (off < data.size()) {
            buffered_ = data.size() - off;
            std::memcpy(buffer_.data(), data.data() + off, buffered_);
        }
    }

    /// Hex digest, lowercase. Finalizes; the object must not be reused.
    std::string hex_digest() {
        const std::uint64_t bit_len = total_ * 8;
        const unsigned char pad_start = 0x80;
        update(std::span<const unsigned char>(&pad_start, 1));
        static constexpr unsigned char zeros[64] = {};
        while (buffered_ != 56) {
            const std::size_t take = buffered_ < 56 ? 56 - buffered_ : 64 - buffered_ + 56;
            update(std::span<const unsigned char>(zeros, std::min<std::size_t>(take, 64 - buffered_)));
        }
        unsigned char len_bytes[8];
        for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>(bit_len >> (8 * i));
        update(std::span<const unsigned char>(len_bytes, 8));

        std::string out;
        out.reserve(32);
        static constexpr char hex[] = "0123456789abcdef";
        for (std::uint32_t word : state_) {
            for (int i = 0; i < 4; ++i) {
                const unsigned char b = static_cast<unsigned char>(word >> (8 * i));
                out.push_back(hex[b >> 4]);
                out.push_back(hex[b & 0xF]);
            }
        }
        return out;
    }

private:
    static std::uint32_t rotl(std::uint32_t x, int c) { return (x << c) | (x >> (32 - c)); }

    void transform(const unsigned char* block) {
        static constexpr std::uint32_t K[64] = {
            0xd76aa478, 0xe8c7b756, 0x242070db, 0xc1bdceee, 0xf57c0faf, 0x4787c62a,
            0xa8304613, 0xfd469501, 0x698098d8, 0x8b44f7af, 0xffff5bb1, 0x895cd7be,
            0x6b901122, 0xfd987193, 0xa679438e, 0x49b40821, 0xf61e2562, 0xc040b340,
            0x265e5a51, 0xe9b6c7aa, 0xd62f105d, 0x02441453, 0xd8a1e681, 0xe7d3fbc8,
            0x21e1cde6, 0xc33707d6, 0xf4d50d87, 0x455a14ed, 0xa9e3e905, 0xfcefa3f8,
            0x676f02d9, 0x8d2a4c8a, 0xfffa3942, 0x8771f681, 0x6d9d6122, 0xfde5380c,
            0xa4beea44, 0x4bdecfa9, 0xf6bb4b60, 0xbebfbc70, 0x289b7ec6, 0xeaa127fa,
            0xd4ef3085, 0x04881d05, 0xd9d4d039, 0xe6db99e5, 0x1fa27cf8, 0xc4ac5665,
            0xf4292244, 0x432aff97, 0xab9423a7, 0xfc93a039, 0x655b59c3, 0x8f0ccc92,
            0xffeff47d, 0x85845dd1, 0x6fa87e4f, 0xfe2ce6e0, 0xa3014314, 0x4e0811a1,
            0xf7537e82, 0xbd3af235, 0x2ad7d2bb, 0xeb86d391};
        static constexpr int S[64] = {7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22,
                                      7, 12, 17, 22, 5, 9,  14, 20, 5, 9,  14, 20,
                                      5, 9,  14, 20, 5, 9,  14, 20, 4, 11, 16, 23,
                                      4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23,
                                      6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21,
                                      6, 10, 15, 21};
        std::uint32_t m[16];
        for (int i = 0; i < 16; ++i)
            m[i] = static_cast<std::uint32_t>(block[4 * i]) |
                   (static_cast<std::uint32_t>(block[4 * i + 1]) << 8) |
                   (static_cast<std::uint32_t>(block[4 * i + 2]) << 16) |
                   (static_cast<std::uint32_t>(block[4 * i + 3]) << 24);

        std::uint32_t a = state_[0], b = state_[1], c = state_[2], d = state_[3];
        for (int i = 0; i < 64; ++i) {
            std::uint32_t f;
            int g;
            if (i < 16) {
                f = (b & c) | (~b & d);
                g = i;
            } else if (i < 32) {
                f = (d & b) | (~d & c);
                g = (5 * i + 1) & 15;
            } else if (i < 48) {
                f = b ^ c ^ d;
                g = (3 * i + 5) & 15;
            } else {
                f = c ^ (b | ~d);
                g = (7 * i) & 15;
            }
            const std::uint32_t tmp = d;
            d = c;
            c = b;
            b = b + rotl(a + f + K[i] + m[g], S[i]);
            a = tmp;
        }
        state_[0] += a;
        state_[1] += b;
        state_[2] += c;
        state_[3] += d;
    }

    std::array<std::uint32_t, 4> state_{0x67452301, 0xefcdab89, 0x98badcfe, 0x10325476};
    std::array<unsigned char, 64> buffer_{};
    std::size_t buffered_ = 0;
    std::uint64_t total_ = 0;
};

inline std::string md5_hex(std::string_view bytes) {
    Md5 h;
    h.update(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
    return h.hex_digest();
}

inline std::string md5_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for checksum: " + path);
    Md5 h;
    std::array<char, 65536> chunk;
    while (in) {
        in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
        const std::streamsize got = in.gcount();
        if (got > 0)
            h.update(std::span<const unsigned char>(
                reinterpret_cast<const unsigned char*>(chunk.data()),
                static_cast<std::size_t>(got)));
    }
    return h.hex_digest();
}

}  // namespace campfin::detail
