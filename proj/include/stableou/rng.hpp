#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace stableou {

/// The library's random source. The mt19937_64 output sequence is fixed by the
/// standard, and uniforms are produced below without std::*_distribution, so
/// draws are reproducible across standard libraries.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive hash of a list of integers, used to derive independent streams.
inline std::uint64_t hash_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

/// Uniform on the open interval (0, 1), 53-bit resolution.
inline double uniform_open(Engine& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_exponential(Engine& rng) { return -std::log(uniform_open(rng)); }

/// Standard normal via Box-Muller (one draw per call, the partner is discarded).
inline double standard_normal(Engine& rng) {
    const double u1 = uniform_open(rng), u2 = uniform_open(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace stableou
