#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace jgn {

using Rng = std::mt19937_64;

/// Independent generator derived from a run seed and a stream name
/// ("init", "shuffle", "embed", ...) plus an optional index.
inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

}  // namespace jgn
