#pragma once

#include <cstdint>
#include <random>

namespace sparnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministically derive an independent sub-seed from a master seed and a
/// stream tag, so every consumer (task, stream, engine, augmentation) gets
/// its own decorrelated generator.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_tag) {
    return splitmix64(master ^ splitmix64(stream_tag + 0x517cc1b727220a95ull));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t stream_tag) {
    return Rng(derive_seed(master, stream_tag));
}

// Stream tags for the generators a run owns.
namespace seed_tag {
inline constexpr std::uint64_t task = 1;
inline constexpr std::uint64_t pretrain = 2;
inline constexpr std::uint64_t stream = 3;
inline constexpr std::uint64_t engine = 4;
inline constexpr std::uint64_t importance = 5;
}  // namespace seed_tag

}  // namespace sparnet
