#include "msfum/rng.hpp"

#include <cmath>

namespace msfum {

double Rng::normal() {
    // Box-Muller on two fresh uniforms; u1 kept away from zero.
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(gen_() % span);
}

}  // namespace msfum
