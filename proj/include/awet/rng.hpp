#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace awet {

/// splitmix64 finalizer; used to turn (seed, stream name) pairs into
/// decorrelated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for a named stream derived from a run seed.
constexpr std::uint64_t stream_seed(std::uint64_t run_seed, std::string_view stream) noexcept {
    return mix64(mix64(run_seed) ^ hash_name(stream));
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t run_seed, std::string_view stream) {
    return Engine{stream_seed(run_seed, stream)};
}

}  // namespace awet
