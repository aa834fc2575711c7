#ifndef INLA_MODEL_HPP
#define INLA_MODEL_HPP

#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "inla/cholesky.hpp"
#include "inla/errors.hpp"
#include "inla/gmrf.hpp"
#include "inla/likelihood.hpp"
#include "inla/sparse.hpp"

namespace inla {

/// Prior for a log-precision hyperparameter (internal scale is always log
/// precision). pc-precision puts an exponential prior with rate
/// -log(alpha)/u on the standard deviation.
struct HyperPrior {
    enum class Kind { PcPrecision, LogGamma, Fixed };

    Kind kind = Kind::Fixed;
    double u = 1.0, alpha = 0.01;  // pc-precision
    double a = 1.0, b = 5e-5;      // log-gamma (shape, rate)
    double value = 1.0;            // fixed precision

    static HyperPrior pc_precision(double u, double alpha) {
        if (!(u > 0.0) || !(alpha > 0.0 && alpha < 1.0))
            throw ValidationError("pc-precision prior needs u > 0 and alpha inside (0, 1)");
        HyperPrior p;
        p.kind = Kind::PcPrecision;
        p.u = u;
        p.alpha = alpha;
        return p;
    }
    static HyperPrior log_gamma(double a, double b) {
        if (!(a > 0.0) || !(b > 0.0))
            throw ValidationError("log-gamma prior needs positive shape and rate");
        HyperPrior p;
        p.kind = Kind::LogGamma;
        p.a = a;
        p.b = b;
        return p;
    }
    static HyperPrior fixed(double v) {
        if (!(v > 0.0)) throw ValidationError("fixed precision must be > 0");
        HyperPrior p;
        p.kind = Kind::Fixed;
        p.value = v;
        return p;
    }

    bool is_fixed() const { return kind == Kind::Fixed; }
    double pc_rate() const { return -std::log(alpha) / u; }

    /// log density in theta = log(precision), Jacobians included.
    double log_density(double theta) const {
        switch (kind) {
            case Kind::PcPrecision: {
                double lambda = pc_rate();
                return std::log(lambda / 2.0) - lambda * std::exp(-theta / 2.0) - theta / 2.0;
            }
            case Kind::LogGamma:
                return a * std::log(b) - std::lgamma(a) + a * theta - b * std::exp(theta);
            case Kind::Fixed:
                if (theta != std::log(value))
                    throw ValidationError("fixed hyperprior evaluated away from its value");
                return 0.0;
        }
        return 0.0;
    }
};

enum class ComponentKind { Intercept, FixedEffect, Iid, Rw2 };

inline std::string component_kind_name(ComponentKind k) {
    switch (k) {
        case ComponentKind::Intercept: return "intercept";
        case ComponentKind::FixedEffect: return "fixed";
        case ComponentKind::Iid: return "iid";
        case ComponentKind::Rw2: return "rw2";
    }
    return "?";
}

/// One additive term of the linear predictor. Intercept and fixed effects
/// are size-1 with a vague fixed-precision Gaussian prior; iid and rw2 carry
/// a hyperprior on their precision.
struct LatentComponent {
    std::string name;
    ComponentKind kind = ComponentKind::Intercept;
    int size = 1;
    std::vector<int> group;        // per observation, iid/rw2: index into [0, size)
    std::vector<double> covariate; // per observation, fixed effects
    std::vector<double> weight;    // per observation, optional multiplier (default 1)
    HyperPrior prior;              // iid/rw2 precision prior
    double fixed_precision = -1.0; // intercept/fixed-effect prior precision; <0 = model default
    int hyper_slot = -1;           // assigned at validation

    bool has_hyper() const {
        return (kind == ComponentKind::Iid || kind == ComponentKind::Rw2) && !prior.is_fixed();
    }
};

/// Assembled latent Gaussian model: observations, likelihood, additive
/// components, hyperpriors. The latent field is (eta block, components...),
/// with eta tied to the component sum through a high-precision noise term.
class LatentGaussianModel {
public:
    std::vector<LatentComponent> components;
    LikelihoodFamily likelihood;
    std::vector<Observation> observations;
    double predictor_noise_log_precision = 15.0;
    double fixed_effect_prior_precision = 0.001;
    double rw2_jitter = 1e-5;

    int n_obs() const { return static_cast<int>(observations.size()); }
    int n_latent() const {
        int n = n_obs();
        for (const auto& c : components) n += c.size;
        return n;
    }
    int theta_dim() const { return static_cast<int>(hyperpriors_.size()); }
    const std::vector<HyperPrior>& hyperpriors() const { return hyperpriors_; }
    const std::vector<std::string>& hyper_names() const { return hyper_names_; }

    /// Offset of component k inside the latent vector.
    int component_offset(int k) const { return offsets_.at(k); }

    /// Sparse map rest -> eta: per observation, (column in rest, weight).
    const std::vector<std::vector<std::pair<int, double>>>& predictor_map() const {
        return bmap_;
    }

    /// Validates the model, assigns hyperparameter slots, and precomputes the
    /// predictor map. Must be called before anything else.
    void validate() {
        if (observations.empty()) throw ValidationError("model: no observations");
        if (components.empty()) throw ValidationError("model: no latent components");
        const int nobs = n_obs();

        hyperpriors_.clear();
        hyper_names_.clear();
        if (likelihood.kind == LikelihoodFamily::Kind::GaussianHyperPrecision) {
            likelihood.theta_slot = 0;
            hyperpriors_.push_back(likelihood_precision_prior);
            hyper_names_.push_back("Precision for the Gaussian observations");
        }
        offsets_.clear();
        int off = nobs;
        for (auto& c : components) {
            offsets_.push_back(off);
            if (c.name.empty()) throw ValidationError("component without a name");
            if (c.kind == ComponentKind::Intercept || c.kind == ComponentKind::FixedEffect) {
                if (c.size != 1)
                    throw ValidationError("component '" + c.name + "': fixed effects have size 1");
            } else {
                if (c.size < 1)
                    throw ValidationError("component '" + c.name + "': size must be >= 1");
                if (c.kind == ComponentKind::Rw2 && c.size < 3)
                    throw ValidationError("component '" + c.name + "': rw2 needs size >= 3");
                if (static_cast<int>(c.group.size()) != nobs)
                    throw ValidationError("component '" + c.name + "': group map must cover every observation");
                for (int g : c.group)
                    if (g < 0 || g >= c.size)
                        throw ValidationError("component '" + c.name + "': group index out of range");
            }
            if (c.kind == ComponentKind::FixedEffect &&
                static_cast<int>(c.covariate.size()) != nobs)
                throw ValidationError("component '" + c.name + "': covariate must cover every observation");
            if (!c.weight.empty() && static_cast<int>(c.weight.size()) != nobs)
                throw ValidationError("component '" + c.name + "': weight must cover every observation");
            if (c.has_hyper()) {
                c.hyper_slot = static_cast<int>(hyperpriors_.size());
                hyperpriors_.push_back(c.prior);
                hyper_names_.push_back("Precision for " + c.name);
            } else {
                c.hyper_slot = -1;
            }
            off += c.size;
        }
        if (theta_dim() > 15)
            throw ValidationError("model: more than 15 hyperparameters (INLA assumes a small theta)");

        for (const auto& o : observations) {
            if (o.predictor_index < 0 || o.predictor_index >= nobs)
                throw ValidationError("observation references a predictor outside the eta block");
            if (!o.missing) likelihood.check_y(o.y);
        }

        bmap_.assign(nobs, {});
        for (size_t k = 0; k < components.size(); ++k) {
            const auto& c = components[k];
            int base = offsets_[k] - nobs;
            for (int i = 0; i < nobs; ++i) {
                double w = c.weight.empty() ? 1.0 : c.weight[i];
                switch (c.kind) {
                    case ComponentKind::Intercept:
                        bmap_[i].emplace_back(base, w);
                        break;
                    case ComponentKind::FixedEffect:
                        bmap_[i].emplace_back(base, w * c.covariate[i]);
                        break;
                    case ComponentKind::Iid:
                    case ComponentKind::Rw2:
                        bmap_[i].emplace_back(base + c.group[i], w);
                        break;
                }
            }
        }
        validated_ = true;
    }

    bool validated() const { return validated_; }

    /// Joint precision of (eta, rest) at theta:
    ///   [ tau_e I      -tau_e B          ]
    ///   [ -tau_e B^T   Q_rest + tau_e B^T B ]
    SparseSymmetric assemble_joint_precision(const std::vector<double>& theta) const {
        require_validated_();
        if (static_cast<int>(theta.size()) != theta_dim())
            throw ValidationError("assemble_joint_precision: theta dimension mismatch");
        const int nobs = n_obs();
        const double tau_e = std::exp(predictor_noise_log_precision);
        std::vector<std::tuple<int, int, double>> trip;
        trip.reserve(nobs * 4 + n_latent() * 3);

        for (int i = 0; i < nobs; ++i) trip.emplace_back(i, i, tau_e);
        for (int i = 0; i < nobs; ++i) {
            for (auto [col, w] : bmap_[i]) {
                if (w != 0.0) trip.emplace_back(nobs + col, i, -tau_e * w);
            }
            // tau_e * B^T B, lower triangle
            for (auto [ca, wa] : bmap_[i])
                for (auto [cb, wb] : bmap_[i]) {
                    if (ca < cb) continue;
                    double v = tau_e * wa * wb;
                    if (v != 0.0) trip.emplace_back(nobs + ca, nobs + cb, v);
                }
        }

        for (size_t k = 0; k < components.size(); ++k) {
            const auto& c = components[k];
            int base = offsets_[k];
            double tau = component_precision_(c, theta);
            switch (c.kind) {
                case ComponentKind::Intercept:
                case ComponentKind::FixedEffect:
                    trip.emplace_back(base, base, tau);
                    break;
                case ComponentKind::Iid:
                    for (int j = 0; j < c.size; ++j) trip.emplace_back(base + j, base + j, tau);
                    break;
                case ComponentKind::Rw2: {
                    auto q = build_rw2_precision(c.size, std::log(tau));
                    const auto& cp = q.colptr();
                    for (int j = 0; j < c.size; ++j)
                        for (int p = cp[j]; p < cp[j + 1]; ++p)
                            trip.emplace_back(base + q.rows()[p], base + j, q.values()[p]);
                    // tiny-noise augmentation keeps the semidefinite prior factorizable
                    for (int j = 0; j < c.size; ++j) trip.emplace_back(base + j, base + j, rw2_jitter);
                    break;
                }
            }
        }
        // ensure every diagonal slot exists (eta block already has them)
        for (int j = nobs; j < n_latent(); ++j) trip.emplace_back(j, j, 0.0);
        auto q = SparseSymmetric::from_triplets(n_latent(), std::move(trip));
        // fixed-effect columns carry couplings ~tau_e * sum(z^2) that cancel
        // down to the vague prior precision; eliminate them first so the
        // pivots stay accurate
        std::vector<int> dense_cols;
        for (size_t k = 0; k < components.size(); ++k) {
            const auto& ck = components[k];
            if (ck.kind == ComponentKind::Intercept || ck.kind == ComponentKind::FixedEffect)
                dense_cols.push_back(offsets_[k]);
        }
        q.set_eliminate_first(std::move(dense_cols));
        return q;
    }

    /// Sum of log hyperprior densities in the internal (log-precision) scale.
    double log_prior_hyper(const std::vector<double>& theta) const {
        require_validated_();
        if (static_cast<int>(theta.size()) != theta_dim())
            throw ValidationError("log_prior_hyper: theta dimension mismatch");
        double s = 0.0;
        for (int j = 0; j < theta_dim(); ++j) s += hyperpriors_[j].log_density(theta[j]);
        return s;
    }

    /// eta_i = B rest (plus any observation offset, applied by callers).
    double predictor_value(int i, const std::vector<double>& rest) const {
        double s = 0.0;
        for (auto [col, w] : bmap_[i]) s += w * rest[col];
        return s;
    }

    /// Prior precision of a single component (hyper slot or fixed value).
    double component_precision_(const LatentComponent& c, const std::vector<double>& theta) const {
        if (c.kind == ComponentKind::Intercept || c.kind == ComponentKind::FixedEffect)
            return c.fixed_precision > 0.0 ? c.fixed_precision : fixed_effect_prior_precision;
        if (c.hyper_slot >= 0) return std::exp(theta[c.hyper_slot]);
        return c.prior.value;
    }

    HyperPrior likelihood_precision_prior = HyperPrior::pc_precision(1.0, 0.01);

private:
    void require_validated_() const {
        if (!validated_) throw ValidationError("model used before validate()");
    }

    std::vector<HyperPrior> hyperpriors_;
    std::vector<std::string> hyper_names_;
    std::vector<int> offsets_;
    std::vector<std::vector<std::pair<int, double>>> bmap_;
    bool validated_ = false;
};

/// log N(x; 0, Q^{-1}) with the determinant from a fresh factorization.
inline double log_gaussian_prior(const SparseSymmetric& q, const std::vector<double>& x) {
    auto f = cholesky(q);
    const double n = static_cast<double>(q.dim());
    return -0.5 * q.quadratic_form(x) + 0.5 * f.log_det() - 0.5 * n * std::log(2.0 * M_PI);
}

// log_prior_latent(model, x, theta) lives in joint_system.hpp, where the
// block structure makes it numerically exact.

}  // namespace inla

#endif
