#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace scalelab::rng {

// splitmix64 finalizer; used to spread user seeds and derive substreams.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Independent substream seed for (master, stream). Deterministic, order-free:
// callers may draw streams in any order or in parallel.
inline constexpr std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream ^ 0x632be59bd9b4e019ull));
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

// Named substream, e.g. derive(seed, "split").
inline constexpr std::uint64_t derive(std::uint64_t master, std::string_view tag) {
    return derive(master, fnv1a(tag));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

} // namespace scalelab::rng
