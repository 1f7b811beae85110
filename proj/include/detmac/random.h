#ifndef DETMAC_RANDOM_H
#define DETMAC_RANDOM_H

#include <cstdint>
#include <random>

namespace detmac {

using Rng = std::mt19937_64;

/// Independent stream for one purpose (power-on draws, one node's backoffs, ...)
/// derived from the run seed.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

}  // namespace detmac

#endif  // DETMAC_RANDOM_H
