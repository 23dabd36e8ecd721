#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace alphacast {

/// Incremental FNV-1a (64-bit). Used for dataset/pool/config fingerprints and
/// prompt hashes; stability across runs matters, cryptographic strength does not.
class Fnv1a {
public:
    Fnv1a& bytes(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= p[i];
            state_ *= 1099511628211ull;
        }
        return *this;
    }

    Fnv1a& str(std::string_view s) { return bytes(s.data(), s.size()); }

    Fnv1a& u64(std::uint64_t v) { return bytes(&v, sizeof(v)); }

    Fnv1a& i64(std::int64_t v) { return bytes(&v, sizeof(v)); }

    Fnv1a& f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        return u64(bits);
    }

    std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = 14695981039346656037ull;
};

inline std::uint64_t hash_string(std::string_view s) { return Fnv1a{}.str(s).value(); }

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

} // namespace alphacast
