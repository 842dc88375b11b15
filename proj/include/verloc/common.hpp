#pragma once

// Shared plumbing: deterministic seed derivation, portable random draws,
// argument checking, and data-file discovery.
//
// Every randomized component in the library takes an explicit 64-bit seed.
// Sub-streams are derived with derive_seed() so that independent parts of a
// simulation (network layout, noise draws, attack placement, ...) never share
// a generator state. The derivation is a fixed splitmix64 chain, so results
// are reproducible across runs and platforms for the same build.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace verloc {

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

namespace detail {

// splitmix64 step (Vigna). Used only for seed derivation, not as the
// simulation generator.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a, 64-bit. Folds a textual stream label into the seed chain.
constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

// Derives an independent seed for the sub-stream identified by (tag, a, b).
// Distinct labels or indices yield unrelated generator states.
constexpr Seed derive_seed(Seed base, std::string_view tag,
                           std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
    std::uint64_t state = base ^ detail::fnv1a(tag);
    std::uint64_t out = detail::splitmix64(state);
    state ^= a;
    out ^= detail::splitmix64(state);
    state ^= b;
    out ^= detail::splitmix64(state);
    return out;
}

inline Rng make_rng(Seed seed) { return Rng(seed); }

// Uniform double in [0, 1) with 53 random bits. Defined here (rather than via
// std::uniform_real_distribution) because the standard leaves distribution
// algorithms unspecified; this keeps seeded outputs stable across toolchains.
inline double u01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * u01(rng);
}

// Uniform integer in [0, n). Multiply-shift; the modulo bias is below 2^-44
// for any n that fits in 20 bits, which covers every use in this library.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Standard normal via Box-Muller (again for cross-toolchain stability).
inline double standard_normal(Rng& rng) {
    double u1 = 0.0;
    do { u1 = u01(rng); } while (u1 <= 0.0);
    const double u2 = u01(rng);
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline double lognormal(Rng& rng, double log_median, double log_sigma) {
    return std::exp(log_median + log_sigma * standard_normal(rng));
}

inline double exponential(Rng& rng, double scale) {
    double u = 0.0;
    do { u = u01(rng); } while (u <= 0.0);
    return -scale * std::log(u);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

// Locates a bundled data file (zone map, propagation model, test vectors).
// Checks $VERLOC_DATA_DIR, then ./data upwards from the working directory,
// then the source-tree data directory baked in at build time.
std::filesystem::path find_data_file(const std::string& name);

} // namespace verloc
