#include "jdc/rng.hpp"

#include <array>

namespace jdc {

Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
    const std::array<std::uint32_t, 7> key = {
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
        static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32),
        0x6a64636fU};
    std::seed_seq seq(key.begin(), key.end());
    return Rng(seq);
}

}  // namespace jdc
