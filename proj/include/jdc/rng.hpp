#pragma once

#include <cstdint>
#include <random>

namespace jdc {

using Rng = std::mt19937_64;

// Stream for path `stream` (and optional sub-stream) derived from a single seed.
// The key is hashed through std::seed_seq, so streams do not depend on
// how paths are distributed over workers.
Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

inline double uniform01(Rng& rng) {
    return std::generate_canonical<double, 53>(rng);
}

}  // namespace jdc
