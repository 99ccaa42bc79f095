#ifndef STFE_RNG_HPP
#define STFE_RNG_HPP

#include <cstdint>

namespace stfe {

/// SplitMix64 output function.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based SplitMix64: draw i of stream `seed` is
/// mix(seed + (i + 1) * golden), so any draw can be computed independently.
/// Draw 0 of seed 0 is 0xE220A8397B1DCDAF.
class CounterRng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    static constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t i)
    {
        return splitmix64_mix(seed + (i + 1) * kGolden);
    }

    std::uint64_t next() { return at(seed_, counter_++); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t counter() const { return counter_; }

    /// Seed of an independent child stream.
    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t index)
    {
        return splitmix64_mix(seed ^ splitmix64_mix(index + kGolden));
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace stfe

#endif // STFE_RNG_HPP
