#pragma once

#include <cstdint>
#include <random>

namespace specae {

// splitmix64 finalizer; used to derive independent child seeds from one
// root seed so every random stream in a run is reproducible.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
    return mix64(root ^ mix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag_a, std::uint64_t tag_b) {
    return mix64(derive_seed(root, tag_a) ^ mix64(tag_b + 0x51ed270b7a14c4f1ull));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace specae
