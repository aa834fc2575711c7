#ifndef INLA_LATENT_MARGINALS_HPP
#define INLA_LATENT_MARGINALS_HPP

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "inla/gaussian_approx.hpp"
#include "inla/joint_system.hpp"
#include "inla/marginal.hpp"
#include "inla/model.hpp"

namespace inla {

/// Latent marginal from the Gaussian approximation: N(mode_i, var_i) with
/// variances from the factor's partial inversion. Fast, exact for Gaussian
/// likelihoods.
inline Marginal gaussian_latent_marginal(const ConditionalGaussian& g,
                                         const std::vector<double>& variances, int i,
                                         int grid_points = 75) {
    if (i < 0 || i >= static_cast<int>(g.mode.size()))
        throw ValidationError("gaussian_latent_marginal: index out of range");
    return gaussian_marginal(g.mode[i], variances[i], grid_points);
}

inline Marginal gaussian_latent_marginal(const ConditionalGaussian& g, int i,
                                         int grid_points = 75) {
    return gaussian_latent_marginal(g, g.variances(), i, grid_points);
}

namespace detail {

/// Newton re-optimization of x_{-i} with x_i clamped, using full-system
/// factorizations and the bordered-solve identity for the reduced step.
/// Returns false when the inner iteration fails to converge.
struct ClampedFit {
    std::vector<double> x;
    double log_numerator = 0.0;    // loglik + latent quadratic at the sub-mode
    double logdet_reduced = 0.0;   // log |(Q+C)_{-i,-i}|
};

inline bool clamped_mode(const GaussianSystemOps& ops, const LikelihoodFamily& fam,
                         const std::vector<Observation>& obs, const std::vector<double>& theta,
                         int clamp, double value, std::vector<double> x, ClampedFit& out,
                         int max_iterations = 50, double tol = 1e-8) {
    const int n = ops.n;
    x[clamp] = value;

    auto objective = [&](const std::vector<double>& v) {
        double s = -0.5 * ops.prior_quadratic(v);
        for (const auto& o : obs) {
            if (o.missing) continue;
            s += fam.loglik(o.y, v[o.predictor_index] + o.offset, theta);
        }
        return s;
    };

    double fx = objective(x);
    if (!std::isfinite(fx)) return false;
    std::vector<double> curvature(n), grad(n), ei(n);
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::fill(curvature.begin(), curvature.end(), 0.0);
        grad = ops.prior_apply(x);
        for (auto& g : grad) g = -g;
        for (const auto& o : obs) {
            if (o.missing) continue;
            double eta = x[o.predictor_index] + o.offset;
            grad[o.predictor_index] += fam.dloglik_deta(o.y, eta, theta);
            curvature[o.predictor_index] -= fam.d2loglik_deta2(o.y, eta, theta);
        }
        grad[clamp] = 0.0;
        FactorizedSystem fs;
        try {
            fs = ops.factorize(curvature);
        } catch (const NumericalError&) {
            return false;
        }

        std::fill(ei.begin(), ei.end(), 0.0);
        ei[clamp] = 1.0;
        std::vector<double> u = fs.solve(ei);  // column `clamp` of (Q+C)^{-1}
        double step_norm = 0.0;
        std::vector<double> step;
        if (n > 1) {
            std::vector<double> w = fs.solve(grad);
            double corr = w[clamp] / u[clamp];
            step = std::move(w);
            for (int j = 0; j < n; ++j) step[j] -= corr * u[j];
            step[clamp] = 0.0;
            for (double s : step) step_norm = std::max(step_norm, std::abs(s));
        }

        if (n == 1 || step_norm < tol) {
            out.x = x;
            out.log_numerator = fx;
            out.logdet_reduced = n == 1 ? 0.0 : fs.log_det + std::log(u[clamp]);
            return true;
        }

        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> trial(n);
        for (int h = 0; h < 20; ++h) {
            for (int j = 0; j < n; ++j) trial[j] = x[j] + alpha * step[j];
            double ft = objective(trial);
            if (std::isfinite(ft) && ft >= fx - 1e-9 * (std::abs(fx) + 1.0)) {
                x.swap(trial);
                fx = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (step_norm < 1e-6) {
                out.x = x;
                out.log_numerator = fx;
                out.logdet_reduced = fs.log_det + std::log(u[clamp]);
                return true;
            }
            return false;
        }
    }
    return false;
}

}  // namespace detail

/// Full Laplace latent marginal: for each grid value of x_i, re-optimize the
/// remaining field, evaluate the joint-over-reduced-Gaussian ratio at the
/// sub-mode, then spline the log densities and normalize. Accurate but needs
/// one factorization sequence per grid point.
inline Marginal laplace_latent_marginal(const LatentGaussianModel& m,
                                        const std::vector<double>& theta, int i,
                                        std::vector<double> grid = {}, int out_points = 161) {
    auto js = std::make_shared<const JointStructure>(build_joint_structure(m, theta));
    GaussianSystemOps ops = system_ops_from_structure(js);
    ConditionalGaussian cg =
        find_conditional_mode(ops, m.likelihood, m.observations, theta);
    if (i < 0 || i >= ops.n)
        throw ValidationError("laplace_latent_marginal: index out of range");
    if (grid.empty()) {
        double sd = std::sqrt(cg.variances()[i]);
        const int npts = 13;
        grid.resize(npts);
        for (int k = 0; k < npts; ++k)
            grid[k] = cg.mode[i] + sd * (-4.0 + 8.0 * k / (npts - 1));
    }
    std::vector<double> xs, logd;
    int dropped = 0;
    for (double v : grid) {
        detail::ClampedFit fit;
        if (!detail::clamped_mode(ops, m.likelihood, m.observations, theta, i, v, cg.mode, fit)) {
            ++dropped;  // inner non-convergence: drop the point
            continue;
        }
        xs.push_back(v);
        logd.push_back(fit.log_numerator - 0.5 * fit.logdet_reduced);
    }
    if (static_cast<int>(xs.size()) < 7)
        throw NumericalError("laplace_latent_marginal: only " + std::to_string(xs.size()) +
                             " grid points survived (" + std::to_string(dropped) + " dropped)");
    // the output spans exactly the surviving grid; no linear tail guessing
    return marginal_from_log_points(std::move(xs), std::move(logd), out_points, 10.0, false);
}

/// Mixture of conditional marginals over support points (the integrated
/// posterior marginal): common 201-point grid spanning the union of inputs,
/// each part interpolated, weighted, summed, renormalized.
inline Marginal mix_marginals(const std::vector<std::pair<Marginal, double>>& parts,
                              int out_points = 201) {
    if (parts.empty()) throw ValidationError("mix_marginals: empty parts");
    double lo = parts[0].first.xs.front(), hi = parts[0].first.xs.back(), wsum = 0.0;
    for (const auto& [m, w] : parts) {
        lo = std::min(lo, m.xs.front());
        hi = std::max(hi, m.xs.back());
        if (w < 0.0) throw ValidationError("mix_marginals: negative weight");
        wsum += w;
    }
    if (!(wsum > 0.0)) throw ValidationError("mix_marginals: zero total weight");

    std::vector<double> xs(out_points), ds(out_points, 0.0);
    for (int k = 0; k < out_points; ++k)
        xs[k] = lo + (hi - lo) * static_cast<double>(k) / (out_points - 1);
    for (const auto& [m, w] : parts) {
        detail::MarginalInterp interp(m);
        for (int k = 0; k < out_points; ++k) ds[k] += (w / wsum) * interp.density(xs[k]);
    }
    return make_marginal(std::move(xs), std::move(ds));
}

}  // namespace inla

#endif
