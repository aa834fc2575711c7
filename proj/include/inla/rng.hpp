#ifndef INLA_RNG_HPP
#define INLA_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace inla {

/// Seeded random stream with engine-owned transforms, so draws are
/// reproducible independent of the standard library's distribution
/// implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// uniform on (0, 1)
    double uniform() {
        // 53-bit mantissa; never returns exactly 0 or 1
        return (static_cast<double>(gen_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// standard normal via Box-Muller (cached spare)
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Poisson draw by sequential inversion; large means split by additivity
    /// to keep the running product away from underflow.
    long poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        long total = 0;
        while (lambda > 60.0) {
            total += poisson_small_(60.0);
            lambda -= 60.0;
        }
        return total + poisson_small_(lambda);
    }

    std::uint64_t raw() { return gen_(); }

private:
    long poisson_small_(double lambda) {
        double p = std::exp(-lambda), cum = p, u = uniform();
        long k = 0;
        while (u > cum && k < 10000) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cum += p;
        }
        return k;
    }

    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace inla

#endif
