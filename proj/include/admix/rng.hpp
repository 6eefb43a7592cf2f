#pragma once

#include <cstdint>

namespace admix {

// Splitmix64 stream. Hand-rolled so results are identical across platforms
// and standard library versions.
struct Rng {
    uint64_t state = 0;

    explicit Rng(uint64_t seed = 0) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    float next_f32() {
        return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
    }

    // Uniform in [lo, hi).
    float uniform(float lo, float hi) { return lo + (hi - lo) * next_f32(); }

    // Uniform in [0, n).
    uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

    // Derives an independent stream, e.g. per image index.
    static Rng derive(uint64_t seed, uint64_t index) {
        Rng mixer(seed ^ (0x632be59bd9b4e019ULL * (index + 1)));
        return Rng(mixer.next_u64());
    }
};

}  // namespace admix
