#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nullstrap {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Hierarchical seed: folds each path component into the master seed, so
// (seed, cell, rep) and (seed, gene) streams never depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept;

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(master, path));
}

// Stream labels keep sibling substreams of one seed apart.
namespace stream {
inline constexpr std::uint64_t size_factors = 0x5346;
inline constexpr std::uint64_t counts = 0x434e54;
inline constexpr std::uint64_t design = 0x4447;
inline constexpr std::uint64_t genes = 0x474e;
inline constexpr std::uint64_t nullstrap = 0x4e53;
inline constexpr std::uint64_t permutation = 0x5045;
} // namespace stream

} // namespace nullstrap
