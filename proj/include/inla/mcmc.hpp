#ifndef INLA_MCMC_HPP
#define INLA_MCMC_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "inla/fit.hpp"
#include "inla/integration.hpp"
#include "inla/latent_marginals.hpp"
#include "inla/rng.hpp"

namespace inla {

/// A family of models indexed by the conditioning parameters z_c, plus the
/// prior placed on z_c. `build` must be deterministic and return validated
/// models. The engine does not police interactions between this prior and
/// priors inside the conditional model; that is the caller's contract.
struct ConditionedModel {
    std::function<LatentGaussianModel(const std::vector<double>&)> build;
    std::function<double(const std::vector<double>&)> log_prior;
    int dim_zc = 1;
};

struct ChainState {
    std::vector<double> zc;
    double log_marglik = 0.0;
    double log_prior = 0.0;
    std::vector<double> theta_mode;  // warm start for the next conditional fit
    std::vector<Marginal> tracked;   // conditional marginals, one per tracked index
};

struct McmcOptions {
    int iterations = 1000;
    int burn_in = -1;  // default: 10% of iterations
    int thin = 1;
    double kernel_scale = 0.5;
    std::uint64_t seed = 0;
    std::vector<int> tracked;  // latent indices of the conditional model
    IntegrationOptions integration;
    std::vector<double> zc_init;
};

/// Componentwise Gaussian random-walk proposal (symmetric, so the proposal
/// ratio is zero); swap in another kernel by providing both callbacks.
struct ProposalKernel {
    std::function<std::vector<double>(Rng&, const std::vector<double>&)> propose;
    std::function<double(const std::vector<double>&, const std::vector<double>&)> log_ratio;

    static ProposalKernel gaussian_walk(double scale) {
        ProposalKernel k;
        k.propose = [scale](Rng& rng, const std::vector<double>& zc) {
            auto out = zc;
            for (auto& v : out) v += scale * rng.gaussian();
            return out;
        };
        k.log_ratio = [](const std::vector<double>&, const std::vector<double>&) { return 0.0; };
        return k;
    }
};

namespace detail {

/// Fit the conditional model at z_c: marginal likelihood estimate plus the
/// mixture marginals of the tracked latent indices.
inline ChainState fit_conditional(const ConditionedModel& cm, const std::vector<double>& zc,
                                  const McmcOptions& opt,
                                  const std::vector<double>* theta_warm = nullptr) {
    LatentGaussianModel m = cm.build(zc);
    if (!m.validated()) throw ValidationError("ConditionedModel::build must validate the model");
    ModelEvaluator ev(m);
    std::vector<double> init(m.theta_dim(), 0.0);
    if (theta_warm && static_cast<int>(theta_warm->size()) == m.theta_dim()) init = *theta_warm;
    auto tp = find_mode_theta(ev, init);
    run_strategy(*tp, opt.integration);

    ChainState st;
    st.zc = zc;
    st.log_marglik = log_marginal_likelihood(*tp);
    st.log_prior = cm.log_prior(zc);
    st.theta_mode = tp->mode();

    if (!opt.tracked.empty()) {
        auto w = normalized_weights(tp->support_points);
        for (int idx : opt.tracked) {
            if (idx < 0 || idx >= m.n_latent())
                throw ValidationError("mcmc: tracked latent index out of range");
            std::vector<std::pair<Marginal, double>> parts;
            for (size_t k = 0; k < tp->support_points.size(); ++k) {
                auto cg = ev.conditional(tp->support_points[k].theta);
                auto vars = cg.variances();
                parts.emplace_back(gaussian_latent_marginal(cg, vars, idx), w[k]);
            }
            st.tracked.push_back(mix_marginals(parts));
        }
    }
    return st;
}

}  // namespace detail

/// One Metropolis-Hastings step. A failed conditional fit rejects the
/// proposal and bumps `failed_fits`.
inline std::pair<ChainState, bool> mh_step(const ConditionedModel& cm, const ChainState& state,
                                           const ProposalKernel& kernel, Rng& rng,
                                           const McmcOptions& opt, int* failed_fits = nullptr,
                                           const std::vector<double>* theta_warm = nullptr) {
    auto zc_new = kernel.propose(rng, state.zc);
    ChainState prop;
    try {
        prop = detail::fit_conditional(cm, zc_new, opt, theta_warm);
    } catch (const Error&) {
        if (failed_fits) ++(*failed_fits);
        double u = rng.uniform();  // keep the stream aligned with accepts
        (void)u;
        return {state, false};
    }
    double log_alpha = (prop.log_marglik + prop.log_prior) -
                       (state.log_marglik + state.log_prior) +
                       kernel.log_ratio(state.zc, zc_new);
    bool accept = std::log(rng.uniform()) < log_alpha;
    if (accept) return {std::move(prop), true};
    return {state, false};
}

struct ChainRecord {
    std::vector<std::vector<double>> zc;  // every iteration
    std::vector<double> log_target;
    std::vector<bool> accepted;
    std::vector<std::vector<double>> kept;  // post burn-in, thinned
    std::vector<std::vector<Marginal>> kept_tracked;  // [kept iteration][tracked index]
    std::vector<int> tracked;
    double acceptance_rate = 0.0;
    int failed_fits = 0;
    bool low_acceptance_warning = false;
};

/// Metropolis-Hastings over the conditioning parameters. Deterministic
/// under the seed; tracked conditional marginals are stored for every kept
/// iteration so they can be averaged afterwards.
inline ChainRecord run_chain(const ConditionedModel& cm, const McmcOptions& opt) {
    if (opt.iterations < 1) throw ValidationError("run_chain: need at least one iteration");
    int burn = opt.burn_in >= 0 ? opt.burn_in : opt.iterations / 10;
    if (burn >= opt.iterations)
        throw ValidationError("run_chain: burn-in must be smaller than the iteration count");
    if (opt.thin < 1) throw ValidationError("run_chain: thin must be >= 1");

    Rng rng(opt.seed);
    auto kernel = ProposalKernel::gaussian_walk(opt.kernel_scale);
    std::vector<double> zc0 =
        opt.zc_init.empty() ? std::vector<double>(cm.dim_zc, 0.0) : opt.zc_init;

    ChainRecord rec;
    rec.tracked = opt.tracked;
    ChainState state = detail::fit_conditional(cm, zc0, opt);
    std::vector<double> theta_warm;  // theta* of the last accepted state

    int accepts = 0;
    for (int it = 0; it < opt.iterations; ++it) {
        auto [next, accepted] =
            mh_step(cm, state, kernel, rng, opt, &rec.failed_fits,
                    theta_warm.empty() ? nullptr : &theta_warm);
        state = std::move(next);
        if (accepted) {
            ++accepts;
            theta_warm = state.theta_mode;
        }
        rec.zc.push_back(state.zc);
        rec.log_target.push_back(state.log_marglik + state.log_prior);
        rec.accepted.push_back(accepted);
        if (it >= burn && (it - burn) % opt.thin == 0) {
            rec.kept.push_back(state.zc);
            if (!opt.tracked.empty()) rec.kept_tracked.push_back(state.tracked);
        }
    }
    rec.acceptance_rate = static_cast<double>(accepts) / opt.iterations;
    rec.low_acceptance_warning = rec.acceptance_rate < 0.01;
    return rec;
}

/// Bayesian-model-averaged marginal of a tracked latent index: the equal-
/// weight mixture of its stored conditional marginals.
inline Marginal bma_marginal(const ChainRecord& rec, int tracked_index) {
    int pos = -1;
    for (size_t j = 0; j < rec.tracked.size(); ++j)
        if (rec.tracked[j] == tracked_index) pos = static_cast<int>(j);
    if (pos < 0) throw ValidationError("bma_marginal: index " + std::to_string(tracked_index) +
                                       " was not tracked");
    if (rec.kept_tracked.empty()) throw ValidationError("bma_marginal: empty chain");
    std::vector<std::pair<Marginal, double>> parts;
    parts.reserve(rec.kept_tracked.size());
    for (const auto& row : rec.kept_tracked)
        parts.emplace_back(row[pos], 1.0 / rec.kept_tracked.size());
    return mix_marginals(parts);
}

struct GridConditioningResult {
    std::vector<std::vector<double>> grid;
    std::vector<double> log_target;     // log marglik + log prior per point
    std::vector<double> weights;        // normalized
    Marginal zc_posterior;              // 1-d conditioning only
    std::vector<Marginal> bma;          // per tracked index
};

/// Deterministic alternative to the chain: evaluate the conditional
/// marginal likelihood on a fixed grid, normalize, and model-average.
inline GridConditioningResult grid_conditioning(const ConditionedModel& cm,
                                                const std::vector<std::vector<double>>& grid,
                                                const McmcOptions& opt) {
    if (grid.empty()) throw ValidationError("grid_conditioning: empty grid");
    GridConditioningResult out;
    out.grid = grid;
    std::vector<ChainState> fits(grid.size());
    parallel_for(static_cast<int>(grid.size()), opt.integration.threads, [&](int k) {
        fits[k] = detail::fit_conditional(cm, grid[k], opt);
    });
    double best = -HUGE_VAL;
    for (auto& f : fits) {
        out.log_target.push_back(f.log_marglik + f.log_prior);
        best = std::max(best, out.log_target.back());
    }
    if (!(best > -HUGE_VAL))
        throw NumericalError("grid_conditioning: the target vanished on the whole grid");
    double total = 0.0;
    for (double v : out.log_target) total += std::exp(v - best);
    for (double v : out.log_target) out.weights.push_back(std::exp(v - best) / total);

    if (cm.dim_zc == 1 && grid.size() >= 9) {
        std::vector<double> xs, ds;
        for (size_t k = 0; k < grid.size(); ++k) {
            xs.push_back(grid[k][0]);
            ds.push_back(std::exp(out.log_target[k] - best));
        }
        out.zc_posterior = make_marginal(std::move(xs), std::move(ds));
    }
    for (size_t j = 0; j < opt.tracked.size(); ++j) {
        std::vector<std::pair<Marginal, double>> parts;
        for (size_t k = 0; k < grid.size(); ++k)
            parts.emplace_back(fits[k].tracked[j], out.weights[k]);
        out.bma.push_back(mix_marginals(parts));
    }
    return out;
}

}  // namespace inla

#endif
