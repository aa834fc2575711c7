#ifndef INLA_GAUSSIAN_APPROX_HPP
#define INLA_GAUSSIAN_APPROX_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "inla/cholesky.hpp"
#include "inla/errors.hpp"
#include "inla/joint_system.hpp"
#include "inla/likelihood.hpp"
#include "inla/model.hpp"
#include "inla/sparse.hpp"

namespace inla {

/// A factorization of (prior precision + likelihood curvature), type-erased
/// so the Newton iteration can run on either a raw sparse matrix or the
/// structured augmented system.
struct FactorizedSystem {
    double log_det = 0.0;
    std::function<std::vector<double>(const std::vector<double>&)> solve;
    std::function<std::vector<double>()> variances;
};

/// Operations the Newton iteration needs from the Gaussian prior.
struct GaussianSystemOps {
    int n = 0;
    std::function<double(const std::vector<double>&)> prior_quadratic;
    std::function<std::vector<double>(const std::vector<double>&)> prior_apply;
    std::function<FactorizedSystem(const std::vector<double>&)> factorize;
};

inline GaussianSystemOps system_ops_from_matrix(const SparseSymmetric& q) {
    auto qp = std::make_shared<const SparseSymmetric>(q);  // owned copy, safe lifetime
    GaussianSystemOps ops;
    ops.n = qp->dim();
    ops.prior_quadratic = [qp](const std::vector<double>& x) { return qp->quadratic_form(x); };
    ops.prior_apply = [qp](const std::vector<double>& x) { return qp->multiply(x); };
    ops.factorize = [qp](const std::vector<double>& c) {
        auto factor = std::make_shared<CholeskyFactor>(cholesky(qp->with_added_diagonal(c)));
        FactorizedSystem fs;
        fs.log_det = factor->log_det();
        fs.solve = [factor](const std::vector<double>& b) { return factor->solve(b); };
        fs.variances = [factor]() { return factor->marginal_variances(); };
        return fs;
    };
    return ops;
}

inline GaussianSystemOps system_ops_from_structure(std::shared_ptr<const JointStructure> js) {
    GaussianSystemOps ops;
    ops.n = js->n_total();
    ops.prior_quadratic = [js](const std::vector<double>& x) { return js->prior_quadratic(x); };
    ops.prior_apply = [js](const std::vector<double>& x) { return js->prior_apply(x); };
    ops.factorize = [js](const std::vector<double>& c) {
        auto factor = std::make_shared<JointFactor>(js, c);
        FactorizedSystem fs;
        fs.log_det = factor->log_det();
        fs.solve = [factor](const std::vector<double>& b) { return factor->solve(b); };
        fs.variances = [factor]() { return factor->marginal_variances(); };
        return fs;
    };
    return ops;
}

/// Gaussian approximation to the latent full conditional, matched at the
/// mode: N(mode, (Q + diag(c))^{-1}) with c the negated likelihood curvature
/// collected on the predictor rows.
struct ConditionalGaussian {
    std::vector<double> mode;
    double log_det = 0.0;  // of the precision at the mode
    double log_density_at_mode = 0.0;
    int newton_iterations = 0;
    double final_step_norm = 0.0;
    std::function<std::vector<double>(const std::vector<double>&)> solve;
    std::function<std::vector<double>()> variances;
    std::function<double(const std::vector<double>&)> deviation_quadratic;  // d^T (Q+C) d
};

/// Newton iteration with step-halving on the penalized objective
///   sum_i log pi(y_i | eta_i) - x^T Q x / 2.
/// Each sweep replaces the log-likelihood terms by their second-order Taylor
/// expansion and solves the resulting Gaussian system.
inline ConditionalGaussian find_conditional_mode(
    const GaussianSystemOps& ops, const LikelihoodFamily& fam,
    const std::vector<Observation>& observations, const std::vector<double>& theta,
    const std::vector<double>* warm_start = nullptr, int max_iterations = 50,
    double step_tol = 1e-8, std::vector<double>* objective_trace = nullptr) {
    const int n = ops.n;
    std::vector<double> x(n, 0.0);
    if (warm_start) {
        if (static_cast<int>(warm_start->size()) != n)
            throw ValidationError("find_conditional_mode: warm start dimension mismatch");
        x = *warm_start;
    }

    auto objective = [&](const std::vector<double>& v) {
        double s = -0.5 * ops.prior_quadratic(v);
        for (const auto& o : observations) {
            if (o.missing) continue;
            s += fam.loglik(o.y, v[o.predictor_index] + o.offset, theta);
        }
        return s;
    };

    auto finish = [&](std::vector<double> mode, FactorizedSystem fs, const std::vector<double>& c,
                      int iters, double step_norm) {
        ConditionalGaussian out;
        out.mode = std::move(mode);
        out.log_det = fs.log_det;
        out.log_density_at_mode =
            0.5 * fs.log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
        out.newton_iterations = iters;
        out.final_step_norm = step_norm;
        out.solve = fs.solve;
        out.variances = fs.variances;
        auto quad = ops.prior_quadratic;
        auto preds = std::make_shared<const std::vector<double>>(c);
        out.deviation_quadratic = [quad, preds](const std::vector<double>& d) {
            double s = quad(d);
            for (size_t i = 0; i < preds->size(); ++i) s += (*preds)[i] * d[i] * d[i];
            return s;
        };
        return out;
    };

    double fx = objective(x);
    if (objective_trace) objective_trace->push_back(fx);

    std::vector<double> curvature(n), grad(n);
    for (int iter = 1; iter <= max_iterations; ++iter) {
        std::fill(curvature.begin(), curvature.end(), 0.0);
        grad = ops.prior_apply(x);
        for (auto& g : grad) g = -g;
        for (const auto& o : observations) {
            if (o.missing) continue;
            double eta = x[o.predictor_index] + o.offset;
            grad[o.predictor_index] += fam.dloglik_deta(o.y, eta, theta);
            curvature[o.predictor_index] -= fam.d2loglik_deta2(o.y, eta, theta);
        }
        FactorizedSystem fs = ops.factorize(curvature);
        std::vector<double> step = fs.solve(grad);
        double step_norm = 0.0;
        for (double s : step) step_norm = std::max(step_norm, std::abs(s));

        if (step_norm < step_tol)
            return finish(std::move(x), std::move(fs), curvature, iter - 1, step_norm);

        // step-halving keeps the objective non-decreasing; the accept band
        // absorbs roundoff from the high-precision predictor augmentation
        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> trial(n);
        for (int h = 0; h < 20; ++h) {
            for (int i = 0; i < n; ++i) trial[i] = x[i] + alpha * step[i];
            double ft = objective(trial);
            if (ft >= fx - 1e-9 * (std::abs(fx) + 1.0)) {
                x.swap(trial);
                fx = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (step_norm < 1e-6)  // noise-floor stall right next to the mode
                return finish(std::move(x), std::move(fs), curvature, iter, step_norm);
            throw NumericalError("find_conditional_mode: line search failed (step norm " +
                                 std::to_string(step_norm) + ")");
        }
        if (objective_trace) objective_trace->push_back(fx);
    }
    throw NumericalError("find_conditional_mode: no convergence after " +
                         std::to_string(max_iterations) + " Newton iterations");
}

inline ConditionalGaussian find_conditional_mode(
    const SparseSymmetric& q, const LikelihoodFamily& fam,
    const std::vector<Observation>& observations, const std::vector<double>& theta,
    const std::vector<double>* warm_start = nullptr, int max_iterations = 50,
    double step_tol = 1e-8, std::vector<double>* objective_trace = nullptr) {
    return find_conditional_mode(system_ops_from_matrix(q), fam, observations, theta, warm_start,
                                 max_iterations, step_tol, objective_trace);
}

inline ConditionalGaussian find_conditional_mode(const LatentGaussianModel& m,
                                                 const std::vector<double>& theta,
                                                 const std::vector<double>* warm_start = nullptr) {
    auto js = std::make_shared<const JointStructure>(build_joint_structure(m, theta));
    return find_conditional_mode(system_ops_from_structure(js), m.likelihood, m.observations,
                                 theta, warm_start);
}

/// Exact log density of the approximating Gaussian at x.
inline double log_gaussian_density(const ConditionalGaussian& g, const std::vector<double>& x) {
    const int n = static_cast<int>(g.mode.size());
    if (static_cast<int>(x.size()) != n)
        throw ValidationError("log_gaussian_density: dimension mismatch");
    std::vector<double> diff(n);
    for (int i = 0; i < n; ++i) diff[i] = x[i] - g.mode[i];
    return g.log_density_at_mode - 0.5 * g.deviation_quadratic(diff);
}

}  // namespace inla

#endif
