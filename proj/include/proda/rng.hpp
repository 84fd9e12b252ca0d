#pragma once

#include <cstdint>

namespace proda {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Combines several keys into one generator seed; order matters.
constexpr std::uint64_t stream_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                                    std::uint64_t d = 0) noexcept {
    std::uint64_t h = mix64(a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    h = mix64(h ^ d);
    return h;
}

} // namespace proda
