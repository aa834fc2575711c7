#ifndef INLA_INTEGRATION_HPP
#define INLA_INTEGRATION_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "inla/errors.hpp"
#include "inla/hyper_posterior.hpp"
#include "inla/parallel.hpp"

namespace inla {

/// Axis-aligned lattice in standardized coordinates, grown outward from the
/// mode ring by ring until the log posterior has dropped more than `cutoff`
/// below the mode everywhere on the frontier. Equal weights: the lattice is
/// equidistant, each point stands for a z-volume of step^dim.
inline std::vector<SupportPoint> grid_strategy(ThetaPosterior& tp, double step = 1.0,
                                               double cutoff = 2.5, int threads = 1,
                                               int max_points = 10000) {
    const int d = tp.dim();
    if (d < 1) throw ValidationError("grid_strategy: needs at least one hyperparameter");
    if (!(step > 0.0) || !(cutoff > 0.0))
        throw ValidationError("grid_strategy: step and cutoff must be positive");
    const double ref = tp.log_posterior_at_mode();

    std::map<std::vector<int>, double> seen;  // lattice coord -> log posterior
    std::vector<std::vector<int>> frontier{std::vector<int>(d, 0)};
    std::vector<std::vector<int>> accepted;

    while (!frontier.empty()) {
        // evaluate the current ring (parallel axis of the engine)
        std::vector<double> vals(frontier.size());
        parallel_for(static_cast<int>(frontier.size()), threads, [&](int i) {
            std::vector<double> z(d);
            for (int j = 0; j < d; ++j) z[j] = frontier[i][j] * step;
            try {
                vals[i] = tp.log_posterior(tp.theta_of_z(z));
            } catch (const NumericalError&) {
                vals[i] = -HUGE_VAL;  // inner solve failed this far out; stop growing here
            }
        });
        std::vector<std::vector<int>> next;
        for (size_t i = 0; i < frontier.size(); ++i) {
            seen.emplace(frontier[i], vals[i]);
            bool keep = (ref - vals[i]) <= cutoff || accepted.empty();
            if (accepted.empty() && frontier.size() == 1) keep = true;  // always keep the mode
            if (!keep) continue;
            accepted.push_back(frontier[i]);
            if (static_cast<int>(accepted.size()) > max_points)
                throw NumericalError(
                    "grid_strategy: more than " + std::to_string(max_points) +
                    " support points; the mode search likely failed");
            for (int j = 0; j < d; ++j) {
                for (int dir : {-1, 1}) {
                    auto nb = frontier[i];
                    nb[j] += dir;
                    if (!seen.count(nb) &&
                        std::find(next.begin(), next.end(), nb) == next.end())
                        next.push_back(nb);
                }
            }
        }
        frontier = std::move(next);
    }

    std::sort(accepted.begin(), accepted.end());  // deterministic order
    double volume = std::pow(step, d) * tp.volume_scale();
    std::vector<SupportPoint> out;
    out.reserve(accepted.size());
    for (const auto& c : accepted) {
        SupportPoint p;
        p.z.resize(d);
        for (int j = 0; j < d; ++j) p.z[j] = c[j] * step;
        p.theta = tp.theta_of_z(p.z);
        p.log_post = seen.at(c);
        p.weight = volume;
        out.push_back(std::move(p));
    }
    tp.support_points = out;
    return out;
}

/// Central composite design: mode + axial points + (fractional) factorial
/// corners on a shell of radius f0 * sqrt(dim). Mode and shell weights solve
/// the zeroth and second Gaussian moments exactly; f0 > 1 keeps the mode
/// weight positive.
inline std::vector<SupportPoint> ccd_strategy(ThetaPosterior& tp, double f0 = 1.2,
                                              int threads = 1) {
    const int d = tp.dim();
    if (d < 1) throw ValidationError("ccd_strategy: needs at least one hyperparameter");
    if (d == 1) return grid_strategy(tp, 1.0, 2.5, threads);  // fallback notice in spec
    if (!(f0 > 1.0)) throw ValidationError("ccd_strategy: f0 must exceed 1");

    const double r = f0 * std::sqrt(static_cast<double>(d));
    std::vector<std::vector<double>> zs;
    zs.emplace_back(d, 0.0);
    for (int j = 0; j < d; ++j) {
        for (double s : {-1.0, 1.0}) {
            std::vector<double> z(d, 0.0);
            z[j] = s * r;
            zs.push_back(std::move(z));
        }
    }
    // factorial corners at radius r; even-parity half fraction beyond dim 6
    const double c = r / std::sqrt(static_cast<double>(d));
    const bool halve = d > 6;
    int n_corners = 0;
    for (long mask = 0; mask < (1L << d); ++mask) {
        int parity = __builtin_popcountl(mask) & 1;
        if (halve && parity) continue;
        std::vector<double> z(d);
        for (int j = 0; j < d; ++j) z[j] = (mask >> j & 1) ? c : -c;
        zs.push_back(std::move(z));
        ++n_corners;
    }

    const int m = 2 * d + n_corners;  // shell size
    const double s_axis = 2.0 * r * r + n_corners * r * r / d;
    const double pow2pi = std::pow(2.0 * M_PI, 0.5 * d);
    const double w_shell = pow2pi * std::exp(0.5 * r * r) / s_axis;
    const double w_mode = pow2pi * (1.0 - static_cast<double>(m) / s_axis);
    if (!(w_mode > 0.0)) throw NumericalError("ccd_strategy: nonpositive mode weight");

    std::vector<SupportPoint> out(zs.size());
    parallel_for(static_cast<int>(zs.size()), threads, [&](int i) {
        SupportPoint p;
        p.z = zs[i];
        p.theta = tp.theta_of_z(p.z);
        p.log_post = tp.log_posterior(p.theta);
        p.weight = (i == 0 ? w_mode : w_shell) * tp.volume_scale();
        out[i] = std::move(p);
    });
    tp.support_points = out;
    return out;
}

/// Empirical Bayes: plug in the mode, ignore hyperparameter variability.
inline std::vector<SupportPoint> eb_strategy(ThetaPosterior& tp) {
    SupportPoint p;
    p.theta = tp.mode();
    p.z.assign(tp.dim(), 0.0);
    p.log_post = tp.log_posterior_at_mode();
    p.weight = 1.0;
    tp.support_points = {p};
    return tp.support_points;
}

struct IntegrationOptions {
    std::string strategy = "auto";  // auto | grid | ccd | eb
    double grid_step = 1.0;
    double grid_cutoff = 2.5;
    double ccd_f0 = 1.2;
    int threads = 1;
};

/// Strategy selection mirroring the reference tool: grid up to dimension
/// two, central composite design beyond, override by flag.
inline std::vector<SupportPoint> run_strategy(ThetaPosterior& tp, const IntegrationOptions& opt) {
    if (tp.dim() == 0) return eb_strategy(tp);
    if (opt.strategy == "eb") return eb_strategy(tp);
    if (opt.strategy == "grid")
        return grid_strategy(tp, opt.grid_step, opt.grid_cutoff, opt.threads);
    if (opt.strategy == "ccd") return ccd_strategy(tp, opt.ccd_f0, opt.threads);
    if (opt.strategy == "auto") {
        if (tp.dim() <= 2) return grid_strategy(tp, opt.grid_step, opt.grid_cutoff, opt.threads);
        return ccd_strategy(tp, opt.ccd_f0, opt.threads);
    }
    throw ValidationError("unknown integration strategy '" + opt.strategy + "'");
}

}  // namespace inla

#endif
