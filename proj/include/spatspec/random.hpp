#pragma once

#include <cstdint>
#include <random>

namespace spatspec {

/// Independent generator for (seed, stream, substream); the mapping is fixed so results
/// never depend on which thread draws them.
[[nodiscard]] inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0,
                                              std::uint64_t substream = 0) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffU); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(substream), hi(substream)};
    return std::mt19937_64(seq);
}

}  // namespace spatspec
