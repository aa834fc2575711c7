#ifndef INLA_LIKELIHOOD_HPP
#define INLA_LIKELIHOOD_HPP

#include <cmath>
#include <string>
#include <vector>

#include "inla/errors.hpp"

namespace inla {

/// Univariate observation models with analytic first and second derivatives
/// in the linear predictor. Normalizing constants are kept exact; they feed
/// the marginal likelihood.
struct LikelihoodFamily {
    enum class Kind { GaussianKnownPrecision, GaussianHyperPrecision, PoissonLogLink };

    Kind kind = Kind::GaussianKnownPrecision;
    double tau_obs = 1.0;  // known-precision gaussian
    int theta_slot = -1;   // hyper-precision gaussian

    static LikelihoodFamily gaussian_known(double tau) {
        if (!(tau > 0.0))
            throw ValidationError("gaussian likelihood: observation precision must be > 0");
        return {Kind::GaussianKnownPrecision, tau, -1};
    }
    static LikelihoodFamily gaussian_hyper(int slot) {
        return {Kind::GaussianHyperPrecision, 1.0, slot};
    }
    static LikelihoodFamily poisson() { return {Kind::PoissonLogLink, 1.0, -1}; }

    bool has_hyper() const { return kind == Kind::GaussianHyperPrecision; }
    bool is_poisson() const { return kind == Kind::PoissonLogLink; }

    std::string name() const {
        return kind == Kind::PoissonLogLink ? "poisson" : "gaussian";
    }

    void check_y(double y) const {
        if (kind == Kind::PoissonLogLink) {
            if (y < 0.0 || std::abs(y - std::round(y)) > 1e-9)
                throw ValidationError("poisson likelihood: response must be a nonnegative count");
        }
        if (!std::isfinite(y)) throw ValidationError("likelihood: response must be finite");
    }

    double precision(const std::vector<double>& theta) const {
        if (kind == Kind::GaussianHyperPrecision) return std::exp(theta.at(theta_slot));
        return tau_obs;
    }

    double loglik(double y, double eta, const std::vector<double>& theta) const {
        check_y(y);
        if (kind == Kind::PoissonLogLink)
            return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
        double tau = precision(theta);
        double r = y - eta;
        return 0.5 * std::log(tau / (2.0 * M_PI)) - 0.5 * tau * r * r;
    }

    double dloglik_deta(double y, double eta, const std::vector<double>& theta) const {
        check_y(y);
        if (kind == Kind::PoissonLogLink) return y - std::exp(eta);
        return precision(theta) * (y - eta);
    }

    double d2loglik_deta2(double y, double eta, const std::vector<double>& theta) const {
        check_y(y);
        if (kind == Kind::PoissonLogLink) return -std::exp(eta);
        return -precision(theta);
    }
};

/// One data point. `predictor_index` selects the single latent element the
/// observation depends on; missing responses contribute nothing to the
/// likelihood but keep their predictor marginal. `offset` is a known shift
/// added to the latent predictor before the likelihood sees it.
struct Observation {
    double y = 0.0;
    int predictor_index = 0;
    bool missing = false;
    double offset = 0.0;
};

}  // namespace inla

#endif
