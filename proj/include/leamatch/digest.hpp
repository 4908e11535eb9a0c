#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

namespace leamatch {

/// Incremental 64-bit FNV-1a. Used for content digests, not for security.
class Fnv1a {
public:
    static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

    void update(std::span<const std::byte> bytes) noexcept {
        for (auto b : bytes) {
            state_ ^= static_cast<std::uint64_t>(b);
            state_ *= kPrime;
        }
    }

    void update(std::string_view text) noexcept {
        update(std::as_bytes(std::span(text.data(), text.size())));
    }

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void update_value(const T& value) noexcept {
        update(std::as_bytes(std::span(&value, 1)));
    }

    std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a(std::span<const std::byte> bytes) noexcept {
    Fnv1a h;
    h.update(bytes);
    return h.value();
}

inline std::uint64_t fnv1a(std::string_view text) noexcept {
    Fnv1a h;
    h.update(text);
    return h.value();
}

/// 16 lowercase hex digits.
std::string digest_hex(std::uint64_t digest);

}  // namespace leamatch
