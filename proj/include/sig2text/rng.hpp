#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sig2text {

/// Engine used everywhere randomness is needed. All streams are derived from
/// one user seed so a run can be replayed bit-for-bit.
using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Named substream of a seed, e.g. substream(seed, "shuffle") or
/// substream(seed, "dataset", record_index).
inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    const std::uint64_t tag = detail::fnv1a(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Uniform real in [lo, hi). Written out rather than using
/// std::uniform_real_distribution so the mapping is identical across standard libraries.
inline double uniform(Rng& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

/// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(rng() % span);
}

}  // namespace sig2text
