/**
 * @file rng.hpp
 * @brief Counter-style seeding so every stream depends only on
 *        (run seed, stream id, chunk index), never on call order.
 */

#pragma once

#include <cstdint>
#include <random>

namespace qgs::rng {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return mix64(mix64(seed ^ mix64(stream)) + index);
}

/// Independent engine for one (stream, chunk) pair.
inline Engine engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return Engine(derive(seed, stream, index));
}

/// Uniform double in [0, 1) from a hash; used for per-slot decisions that must
/// not depend on processing order.
constexpr double hash_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return static_cast<double>(derive(seed, stream, index) >> 11) * 0x1.0p-53;
}

// Stream ids. Fixed forever: changing one changes every simulated run.
inline constexpr std::uint64_t kStreamBackground = 1;
inline constexpr std::uint64_t kStreamPhotons = 2;
inline constexpr std::uint64_t kStreamSync = 3;
inline constexpr std::uint64_t kStreamTracking = 4;
inline constexpr std::uint64_t kStreamPointing = 5;
inline constexpr std::uint64_t kStreamSiftTieBreak = 6;
inline constexpr std::uint64_t kStreamErrorSample = 7;
inline constexpr std::uint64_t kStreamSlotIntensity = 8;
inline constexpr std::uint64_t kStreamSlotBasis = 9;
inline constexpr std::uint64_t kStreamSlotBit = 10;

}  // namespace qgs::rng
