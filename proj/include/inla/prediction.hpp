#ifndef INLA_PREDICTION_HPP
#define INLA_PREDICTION_HPP

#include <cmath>
#include <string>
#include <vector>

#include "inla/fit.hpp"
#include "inla/likelihood.hpp"
#include "inla/marginal.hpp"
#include "inla/rng.hpp"

namespace inla {

/// Posterior predictive distribution for one observation: a pmf over
/// 0..k_max for count likelihoods, a density tabulation otherwise.
struct PredictiveDistribution {
    bool discrete = true;
    std::vector<double> support;
    std::vector<double> mass;
    Marginal density;  // continuous case

    double mean() const {
        if (!discrete) return expect_scalar(density, [](double x) { return x; });
        double s = 0.0;
        for (size_t i = 0; i < support.size(); ++i) s += support[i] * mass[i];
        return s;
    }
    double variance() const {
        if (!discrete) {
            auto mm = expect(density, [](double x) { return std::vector<double>{x, x * x}; });
            return mm[1] - mm[0] * mm[0];
        }
        double m1 = mean(), m2 = 0.0;
        for (size_t i = 0; i < support.size(); ++i) s_acc(m2, support[i] * support[i] * mass[i]);
        return m2 - m1 * m1;
    }

private:
    static void s_acc(double& acc, double v) { acc += v; }
};

/// Fitted-value (observation scale) marginal of observation i: the stored
/// predictor marginal pushed through the inverse link.
inline Marginal fitted_value_marginal(const FitResult& fr, int i) {
    if (i < 0 || i >= fr.n_obs)
        throw ValidationError("fitted_value_marginal: observation index out of range");
    return fr.fitted[i];
}

inline void require_predictive_supported(const LikelihoodFamily& fam) {
    if (fam.kind == LikelihoodFamily::Kind::GaussianHyperPrecision)
        throw ValidationError(
            "predictive distribution with a hyperparameter in the likelihood needs joint "
            "(eta, theta) sampling, which this engine does not provide");
}

/// Two-stage sampling: draw the observation-scale parameter from its
/// marginal, then draw the response from the likelihood.
inline std::vector<double> predictive_by_sampling(const Marginal& obs_scale,
                                                  const LikelihoodFamily& fam, int n,
                                                  std::uint64_t seed) {
    require_predictive_supported(fam);
    auto lambdas = sample(obs_scale, n, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<double> out(lambdas.size());
    for (size_t i = 0; i < lambdas.size(); ++i) {
        if (fam.is_poisson())
            out[i] = static_cast<double>(rng.poisson(lambdas[i]));
        else
            out[i] = lambdas[i] + rng.gaussian() / std::sqrt(fam.tau_obs);
    }
    return out;
}

/// Panel-midpoint quadrature over the parameter marginal: each adjacent
/// grid pair contributes pmf(support; midpoint) times its trapezoid mass.
/// The support auto-widens until it carries 99.9% of the mass.
inline PredictiveDistribution predictive_by_quadrature(const Marginal& obs_scale,
                                                       const LikelihoodFamily& fam,
                                                       int k_max = 100) {
    require_predictive_supported(fam);
    PredictiveDistribution pd;
    if (fam.is_poisson()) {
        for (int attempt = 0; attempt < 8; ++attempt) {
            pd.support.resize(k_max + 1);
            pd.mass.assign(k_max + 1, 0.0);
            for (int j = 0; j <= k_max; ++j) pd.support[j] = j;
            for (size_t p = 0; p + 1 < obs_scale.xs.size(); ++p) {
                double lam = 0.5 * (obs_scale.xs[p] + obs_scale.xs[p + 1]);
                if (lam <= 0.0) continue;  // poisson mean must be positive
                double panel = 0.5 * (obs_scale.ds[p] + obs_scale.ds[p + 1]) *
                               (obs_scale.xs[p + 1] - obs_scale.xs[p]);
                double loglam = std::log(lam);
                for (int j = 0; j <= k_max; ++j)
                    pd.mass[j] += panel * std::exp(j * loglam - lam - std::lgamma(j + 1.0));
            }
            double total = 0.0;
            for (double v : pd.mass) total += v;
            if (total >= 0.999) {
                pd.discrete = true;
                return pd;
            }
            k_max *= 2;
            if (attempt == 7)
                throw NumericalError("predictive_by_quadrature: support up to " +
                                     std::to_string(k_max / 2) + " carries only " +
                                     std::to_string(total) + " mass; widen it");
        }
    }
    // gaussian with known precision: mixture of normals over the panels
    double sd_obs = 1.0 / std::sqrt(fam.tau_obs);
    double lo = obs_scale.xs.front() - 6.0 * sd_obs;
    double hi = obs_scale.xs.back() + 6.0 * sd_obs;
    const int npts = 201;
    std::vector<double> xs(npts), ds(npts, 0.0);
    for (int i = 0; i < npts; ++i) xs[i] = lo + (hi - lo) * i / (npts - 1);
    for (size_t p = 0; p + 1 < obs_scale.xs.size(); ++p) {
        double mu = 0.5 * (obs_scale.xs[p] + obs_scale.xs[p + 1]);
        double panel = 0.5 * (obs_scale.ds[p] + obs_scale.ds[p + 1]) *
                       (obs_scale.xs[p + 1] - obs_scale.xs[p]);
        for (int i = 0; i < npts; ++i) {
            double z = (xs[i] - mu) / sd_obs;
            ds[i] += panel * std::exp(-0.5 * z * z) / (sd_obs * std::sqrt(2.0 * M_PI));
        }
    }
    pd.discrete = false;
    pd.density = make_marginal(std::move(xs), std::move(ds));
    return pd;
}

}  // namespace inla

#endif
