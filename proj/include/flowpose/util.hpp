#pragma once

#include <cstdint>
#include <random>

namespace flowpose {

// SplitMix64 mixing step.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent seed from (seed, stream, index, subindex). Every
// random draw in the library goes through this, so results never depend on
// the order in which samples or steps happen to be processed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index = 0, std::uint64_t sub = 0) {
    std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
    h = splitmix64(h + stream);
    h = splitmix64(h + index);
    h = splitmix64(h + sub);
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

// Named RNG streams, kept distinct so adding draws to one consumer does not
// shift any other consumer's sequence.
namespace rng_stream {
constexpr std::uint64_t kWorld = 1;
constexpr std::uint64_t kSamplePose = 2;
constexpr std::uint64_t kSampleMotion = 3;
constexpr std::uint64_t kFlowNoise = 4;
constexpr std::uint64_t kCropParams = 5;
constexpr std::uint64_t kModelInit = 6;
constexpr std::uint64_t kBatch = 7;
constexpr std::uint64_t kBatchCrop = 8;
constexpr std::uint64_t kEvalCrop = 9;
}  // namespace rng_stream

}  // namespace flowpose
