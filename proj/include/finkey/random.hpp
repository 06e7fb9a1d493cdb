#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "finkey/linalg.hpp"

namespace finkey {

// mt19937_64 has a fixed output sequence across platforms; the standard
// distributions do not, so the samplers below are written out by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0x5eed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        while (u <= 0.0) u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(2.0 * M_PI * v);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * v);
    }

    std::uint64_t below(std::uint64_t n) {
        // rejection to avoid modulo bias
        const std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do x = eng_(); while (x >= lim);
        return x % n;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

CMat random_hermitian(int d, Rng& rng);
CMat random_unitary(int d, Rng& rng);
CMat random_density(int d, Rng& rng, int rank = -1);

}  // namespace finkey
