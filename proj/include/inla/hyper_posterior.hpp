#ifndef INLA_HYPER_POSTERIOR_HPP
#define INLA_HYPER_POSTERIOR_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "inla/errors.hpp"
#include "inla/gaussian_approx.hpp"
#include "inla/marginal.hpp"
#include "inla/model.hpp"
#include "inla/optim.hpp"

namespace inla {

/// One quadrature node in hyperparameter space: location, standardized
/// coordinates, unnormalized log posterior, and integration weight (a
/// theta-space volume element).
struct SupportPoint {
    std::vector<double> theta;
    std::vector<double> z;
    double log_post = 0.0;
    double weight = 1.0;
};

/// Normalized mixture weights exp(log_post - max) * weight / sum.
inline std::vector<double> normalized_weights(const std::vector<SupportPoint>& pts) {
    if (pts.empty()) throw ValidationError("normalized_weights: empty support set");
    double mx = pts[0].log_post;
    for (const auto& p : pts) mx = std::max(mx, p.log_post);
    std::vector<double> w(pts.size());
    double total = 0.0;
    for (size_t k = 0; k < pts.size(); ++k) {
        w[k] = std::exp(pts[k].log_post - mx) * pts[k].weight;
        total += w[k];
    }
    if (!(total > 0.0)) throw NumericalError("normalized_weights: all support points vanish");
    for (auto& v : w) v /= total;
    return w;
}

namespace detail {

/// Tiny dense Cholesky for the theta Hessian (dimension <= 15).
/// Returns false when a pivot fails.
inline bool dense_cholesky(const std::vector<std::vector<double>>& h,
                           std::vector<std::vector<double>>& l) {
    const int d = static_cast<int>(h.size());
    l.assign(d, std::vector<double>(d, 0.0));
    for (int j = 0; j < d; ++j) {
        double s = h[j][j];
        for (int k = 0; k < j; ++k) s -= l[j][k] * l[j][k];
        if (!(s > 0.0)) return false;
        l[j][j] = std::sqrt(s);
        for (int i = j + 1; i < d; ++i) {
            double v = h[i][j];
            for (int k = 0; k < j; ++k) v -= l[i][k] * l[j][k];
            l[i][j] = v / l[j][j];
        }
    }
    return true;
}

/// V = L^{-T}, so that V^T H V = I when H = L L^T.
inline std::vector<std::vector<double>> inverse_transpose_lower(
    const std::vector<std::vector<double>>& l) {
    const int d = static_cast<int>(l.size());
    std::vector<std::vector<double>> v(d, std::vector<double>(d, 0.0));
    // columns of V solve L^T v_col = e_col; V is upper triangular
    for (int c = 0; c < d; ++c) {
        std::vector<double> e(d, 0.0);
        e[c] = 1.0;
        for (int i = d - 1; i >= 0; --i) {
            double s = e[i];
            for (int k = i + 1; k < d; ++k) s -= l[k][i] * v[k][c];
            v[i][c] = s / l[i][i];
        }
    }
    return v;
}

}  // namespace detail

/// The explored hyperparameter posterior: a log target, its mode, a
/// finite-difference Hessian with standardizing factor, the record of every
/// evaluation, and (once an integration strategy ran) the support points.
class ThetaPosterior {
public:
    ThetaPosterior(int dim, std::function<double(const std::vector<double>&)> target)
        : dim_(dim), target_(std::move(target)) {
        mode_.assign(dim_, 0.0);
        set_identity_standardizer_();
    }

    int dim() const { return dim_; }

    /// Evaluate the unnormalized log posterior, recording the point.
    double log_posterior(const std::vector<double>& theta) const {
        if (static_cast<int>(theta.size()) != dim_)
            throw ValidationError("ThetaPosterior: theta dimension mismatch");
        double v = target_(theta);
        std::lock_guard<std::mutex> lock(mu_);
        evaluations_.emplace_back(theta, v);
        return v;
    }

    const std::vector<std::pair<std::vector<double>, double>>& evaluations() const {
        return evaluations_;
    }

    const std::vector<double>& mode() const { return mode_; }
    double log_posterior_at_mode() const { return mode_value_; }
    const std::vector<std::vector<double>>& hessian() const { return hessian_; }
    bool hessian_ok() const { return hessian_ok_; }

    /// theta = mode + V z with V^T H V = I (identity fallback on a bad Hessian).
    std::vector<double> theta_of_z(const std::vector<double>& z) const {
        std::vector<double> th = mode_;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) th[i] += standardizer_[i][j] * z[j];
        return th;
    }
    const std::vector<std::vector<double>>& standardizer() const { return standardizer_; }

    /// |det V| = |H|^{-1/2}; the z-to-theta volume element.
    double volume_scale() const { return volume_scale_; }

    /// Marginal standard deviation of slot j implied by the Hessian.
    double slot_sd(int j) const {
        double s = 0.0;
        for (int k = 0; k < dim_; ++k) s += standardizer_[j][k] * standardizer_[j][k];
        return std::sqrt(s);
    }

    std::vector<SupportPoint> support_points;

    // --- filled by find_mode_theta ---
    void set_mode(std::vector<double> mode, double value) {
        mode_ = std::move(mode);
        mode_value_ = value;
    }
    void set_hessian(std::vector<std::vector<double>> h) {
        hessian_ = std::move(h);
        std::vector<std::vector<double>> l;
        if (dim_ > 0 && detail::dense_cholesky(hessian_, l)) {
            standardizer_ = detail::inverse_transpose_lower(l);
            hessian_ok_ = true;
            double ld = 0.0;
            for (int i = 0; i < dim_; ++i) ld += std::log(l[i][i]);
            volume_scale_ = std::exp(-ld);
        } else {
            set_identity_standardizer_();
            hessian_ok_ = dim_ == 0;
        }
    }

private:
    void set_identity_standardizer_() {
        standardizer_.assign(dim_, std::vector<double>(dim_, 0.0));
        for (int i = 0; i < dim_; ++i) standardizer_[i][i] = 1.0;
        volume_scale_ = 1.0;
    }

    int dim_;
    std::function<double(const std::vector<double>&)> target_;
    std::vector<double> mode_;
    double mode_value_ = 0.0;
    std::vector<std::vector<double>> hessian_;
    std::vector<std::vector<double>> standardizer_;
    double volume_scale_ = 1.0;
    bool hessian_ok_ = false;
    mutable std::mutex mu_;
    mutable std::vector<std::pair<std::vector<double>, double>> evaluations_;
};

/// Laplace-approximated unnormalized log pi(theta | y): numerator terms of
/// the posterior at the conditional mode, minus the Gaussian approximation
/// there (whose quadratic term vanishes). Exact for Gaussian likelihoods.
/// The prior log-determinant and quadratic form come from the block
/// structure, which stays accurate where the raw joint matrix would not.
inline double log_posterior_theta(const LatentGaussianModel& m, const std::vector<double>& theta,
                                  const std::vector<double>* warm_start = nullptr,
                                  ConditionalGaussian* fit_out = nullptr) {
    auto js = std::make_shared<const JointStructure>(build_joint_structure(m, theta));
    ConditionalGaussian cg = find_conditional_mode(system_ops_from_structure(js), m.likelihood,
                                                   m.observations, theta, warm_start);
    double loglik = 0.0;
    for (const auto& o : m.observations) {
        if (o.missing) continue;
        loglik += m.likelihood.loglik(o.y, cg.mode[o.predictor_index] + o.offset, theta);
    }
    double lp_latent = -0.5 * js->prior_quadratic(cg.mode) + 0.5 * js->prior_log_det() -
                       0.5 * js->n_total() * std::log(2.0 * M_PI);
    double v = loglik + lp_latent + m.log_prior_hyper(theta) - cg.log_density_at_mode;
    if (fit_out) *fit_out = std::move(cg);
    return v;
}

/// Thread-safe model-backed target with a warm-started inner Newton solve.
class ModelEvaluator {
public:
    explicit ModelEvaluator(const LatentGaussianModel& m) : m_(&m) {
        if (!m.validated()) throw ValidationError("ModelEvaluator: model not validated");
    }

    double operator()(const std::vector<double>& theta) const {
        std::vector<double> warm;
        {
            std::lock_guard<std::mutex> lock(mu_);
            warm = warm_;
        }
        ConditionalGaussian cg;
        double v = log_posterior_theta(*m_, theta, warm.empty() ? nullptr : &warm, &cg);
        {
            std::lock_guard<std::mutex> lock(mu_);
            warm_ = cg.mode;
        }
        return v;
    }

    ConditionalGaussian conditional(const std::vector<double>& theta) const {
        std::vector<double> warm;
        {
            std::lock_guard<std::mutex> lock(mu_);
            warm = warm_;
        }
        return find_conditional_mode(*m_, theta, warm.empty() ? nullptr : &warm);
    }

    const LatentGaussianModel& model() const { return *m_; }

private:
    const LatentGaussianModel* m_;
    mutable std::mutex mu_;
    mutable std::vector<double> warm_;
};

/// Nelder-Mead ascent on the log posterior followed by a central-difference
/// Hessian (step 0.01 on the log-precision scale, symmetrized).
inline std::shared_ptr<ThetaPosterior> find_mode_theta(
    int dim, std::function<double(const std::vector<double>&)> target,
    const std::vector<double>& init, double fd_step = 0.01) {
    if (static_cast<int>(init.size()) != dim)
        throw ValidationError("find_mode_theta: init dimension mismatch");
    for (double v : init)
        if (!std::isfinite(v)) throw ValidationError("find_mode_theta: init must be finite");

    auto tp = std::make_shared<ThetaPosterior>(dim, std::move(target));
    auto neg = [&tp](const std::vector<double>& th) { return -tp->log_posterior(th); };

    auto nm = nelder_mead(neg, init, 0.5, 1e-5);
    tp->set_mode(nm.x, -nm.fmin);

    if (dim > 0) {
        const double h = fd_step;
        std::vector<std::vector<double>> hess(dim, std::vector<double>(dim, 0.0));
        double f0 = tp->log_posterior_at_mode();
        auto at = [&](std::vector<double> th) { return tp->log_posterior(th); };
        for (int i = 0; i < dim; ++i) {
            auto tp1 = nm.x, tm1 = nm.x;
            tp1[i] += h;
            tm1[i] -= h;
            hess[i][i] = -(at(tp1) + at(tm1) - 2.0 * f0) / (h * h);
            for (int j = i + 1; j < dim; ++j) {
                auto tpp = nm.x, tpm = nm.x, tmp = nm.x, tmm = nm.x;
                tpp[i] += h; tpp[j] += h;
                tpm[i] += h; tpm[j] -= h;
                tmp[i] -= h; tmp[j] += h;
                tmm[i] -= h; tmm[j] -= h;
                double v = -(at(tpp) - at(tpm) - at(tmp) + at(tmm)) / (4.0 * h * h);
                hess[i][j] = hess[j][i] = v;  // symmetrized by construction
            }
        }
        tp->set_hessian(std::move(hess));
    } else {
        tp->set_hessian({});
    }
    return tp;
}

inline std::shared_ptr<ThetaPosterior> find_mode_theta(const ModelEvaluator& ev,
                                                       const std::vector<double>& init) {
    return find_mode_theta(static_cast<int>(init.size()),
                           [&ev](const std::vector<double>& th) { return ev(th); }, init);
}

/// Posterior marginal of one hyperparameter slot (internal log-precision
/// scale). Dimension 1 splines the recorded exact evaluations; higher
/// dimensions kernel-smooth the weighted support points per slot, which is a
/// documented approximation.
inline Marginal normalized_theta_marginal(const ThetaPosterior& tp, int slot,
                                          int out_points = 201) {
    if (slot < 0 || slot >= tp.dim())
        throw ValidationError("normalized_theta_marginal: slot out of range");
    if (tp.dim() == 1) {
        std::vector<double> xs, ld;
        double best = -HUGE_VAL;
        for (const auto& [th, v] : tp.evaluations()) best = std::max(best, v);
        for (const auto& [th, v] : tp.evaluations()) {
            if (v < best - 25.0) continue;  // wild exploratory points add nothing
            xs.push_back(th[slot]);
            ld.push_back(v);
        }
        if (xs.size() < 5)
            throw ValidationError("normalized_theta_marginal: fewer than 5 usable evaluations");
        return marginal_from_log_points(std::move(xs), std::move(ld), out_points);
    }
    if (tp.support_points.empty())
        throw ValidationError("normalized_theta_marginal: run an integration strategy first");
    auto w = normalized_weights(tp.support_points);
    std::vector<double> centers(tp.support_points.size());
    for (size_t k = 0; k < centers.size(); ++k) centers[k] = tp.support_points[k].theta[slot];
    double bw = 0.75 * tp.slot_sd(slot);
    if (!(bw > 0.0)) bw = 0.1;
    double lo = centers[0], hi = centers[0];
    for (double c : centers) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    lo -= 3.5 * bw;
    hi += 3.5 * bw;
    std::vector<double> xs(out_points), ds(out_points, 0.0);
    for (int i = 0; i < out_points; ++i) {
        xs[i] = lo + (hi - lo) * i / (out_points - 1);
        for (size_t k = 0; k < centers.size(); ++k) {
            double zz = (xs[i] - centers[k]) / bw;
            ds[i] += w[k] * std::exp(-0.5 * zz * zz);
        }
    }
    return make_marginal(std::move(xs), std::move(ds));
}

/// log of the integrated unnormalized posterior: the marginal likelihood
/// estimate, max-shifted for stability.
inline double log_marginal_likelihood(const ThetaPosterior& tp) {
    const auto& pts = tp.support_points;
    if (pts.empty()) throw ValidationError("log_marginal_likelihood: empty support set");
    double mx = pts[0].log_post;
    for (const auto& p : pts) mx = std::max(mx, p.log_post);
    double s = 0.0;
    for (const auto& p : pts) s += std::exp(p.log_post - mx) * p.weight;
    return mx + std::log(s);
}

}  // namespace inla

#endif
