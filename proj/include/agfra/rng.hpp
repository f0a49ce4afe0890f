#pragma once

#include <cstdint>
#include <random>

namespace agfra {

using Rng = std::mt19937_64;

// splitmix64 step, used to derive independent substream seeds from a master
// seed. Substream i of master seed m is seeded with mix_seed(m, i).
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t stream = 0) {
    return Rng(mix_seed(master, stream));
}

}  // namespace agfra
