#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "adanas/hash.hpp"

namespace adanas {

// Splittable counter-based PRNG (SplitMix64 core). One experiment seed feeds
// the whole run; every stochastic site derives its own independent stream via
// split(), so adding or reordering sites never perturbs the others.
class SplitRng {
public:
    explicit SplitRng(uint64_t seed) : seed_(seed) {}

    // Derives an independent stream keyed by a tag. Splitting does not
    // consume state from this stream.
    SplitRng split(uint64_t tag) const { return SplitRng(mix(seed_ ^ mix(tag + 0x632be59bd9b4e019ULL))); }
    SplitRng split(std::string_view tag) const { return split(fnv1a(tag)); }

    uint64_t state() const { return seed_ + counter_ * kGamma; }

    uint64_t next_u64() { return mix(seed_ + (++counter_) * kGamma); }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller (draws two uniforms per call).
    double normal();

    // Unbiased integer in [0, n), n >= 1.
    uint64_t next_index(uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    uint64_t counter_ = 0;
};

} // namespace adanas
