#pragma once

#include <cstdint>
#include <random>

namespace mvst {

/// Engine used for every random draw in the library.
using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives the seed of a child stream.
///
/// Streams form a tree: `stream_seed(seed, i)` is the i-th child of `seed`, and
/// children can be split again. Every random consumer in the library takes its own
/// stream, so draw i of a batch depends only on (seed, i) and never on how the batch
/// was partitioned across threads.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t index) {
    return Engine(stream_seed(seed, index));
}

}  // namespace mvst
