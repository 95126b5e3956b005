#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace openg2g {

// Deterministic stream splitting: every stochastic consumer derives its own
// generator from the master seed plus a (component id, purpose) key, so
// adding or reordering consumers never shifts anybody else's draws.

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace detail

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                                 std::string_view purpose) {
    std::uint64_t h = detail::fnv1a64(component);
    h = detail::fnv1a64(purpose, h ^ 0x517cc1b727220a95ull);
    return detail::splitmix64(master ^ h);
}

inline std::mt19937_64 derive_stream(std::uint64_t master, std::string_view component,
                                     std::string_view purpose) {
    return std::mt19937_64(derive_seed(master, component, purpose));
}

} // namespace openg2g
