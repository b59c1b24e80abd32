#pragma once

#include <cstdint>
#include <string_view>

namespace evoprune {

// Finalizer from splitmix64; used for seed derivation and stream setup.
std::uint64_t mix64(std::uint64_t x);

// Child seed for a named stream. Adding streams or raising an index bound
// never perturbs existing streams, which is what keeps datasets prefix-stable
// and candidate evaluation schedule-independent.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index);

// xoshiro256** with explicit, platform-independent uniform/gaussian helpers.
// std::* distributions are implementation-defined and unusable for frozen
// expectations, so everything is spelled out here.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // [0, 1)
    double uniform();
    // (0, 1]
    double uniform_open();
    // unbiased integer in [0, n), n >= 1
    std::uint64_t below(std::uint64_t n);
    // standard normal via Box-Muller; two uniforms per call, no cached state
    double gaussian();

private:
    std::uint64_t s_[4];
};

} // namespace evoprune
