#pragma once

#include <cstdint>
#include <random>

namespace msfum {

// Seeded generator with bit-stable distributions. The standard
// distributions are implementation-defined, so uniform/normal are derived
// from the raw 64-bit stream directly to keep runs reproducible across
// toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Box-Muller; one fresh pair per call, second value discarded.
    double normal();

    // inclusive range
    int64_t uniform_int(int64_t lo, int64_t hi);

    Rng fork() { return Rng(gen_()); }

private:
    std::mt19937_64 gen_;
};

}  // namespace msfum
