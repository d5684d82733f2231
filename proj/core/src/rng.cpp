#include "drcal/rng.hpp"

namespace drcal {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
    return h;
}

std::mt19937_64 RngStream::engine(std::uint64_t tag) const {
    std::uint64_t k = stream_key(seed, replicate_index, tag);
    std::seed_seq seq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(replicate_index)};
    return std::mt19937_64(seq);
}

}  // namespace drcal
