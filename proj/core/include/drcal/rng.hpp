#pragma once

#include <cstdint>
#include <random>

namespace drcal {

std::uint64_t splitmix64(std::uint64_t x);

// Mixes (seed, a, b) into one 64-bit key. Used for replicate streams and CV folds.
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t replicate_index = 0;

    // Independent engine for a named purpose within the replicate.
    std::mt19937_64 engine(std::uint64_t tag) const;
};

}  // namespace drcal
