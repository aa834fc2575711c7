#ifndef INLA_GMRF_HPP
#define INLA_GMRF_HPP

#include <cmath>
#include <tuple>
#include <vector>

#include "inla/errors.hpp"
#include "inla/sparse.hpp"

namespace inla {

/// exp(log_tau) * I, the precision of independent Gaussian noise.
inline SparseSymmetric build_iid_precision(int n, double log_tau) {
    if (n < 1) throw ValidationError("build_iid_precision: empty model (n = 0)");
    return SparseSymmetric::identity(n, std::exp(log_tau));
}

/// tau * D^T D where D is the (T-2) x T second-difference matrix. Band
/// matrix with bandwidth 2, rank T-2 (the null space holds constants and
/// linear ramps).
inline SparseSymmetric build_rw2_precision(int T, double log_tau) {
    if (T < 3)
        throw ValidationError("build_rw2_precision: length must be >= 3 for second differences");
    const double tau = std::exp(log_tau);
    std::vector<std::tuple<int, int, double>> trip;
    trip.reserve(3 * T);
    for (int r = 0; r < T - 2; ++r) {
        // Row r of D has (1, -2, 1) at columns (r, r+1, r+2).
        const double d[3] = {1.0, -2.0, 1.0};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b <= a; ++b)
                trip.emplace_back(r + a, r + b, tau * d[a] * d[b]);
    }
    return SparseSymmetric::from_triplets(T, std::move(trip));
}

}  // namespace inla

#endif
