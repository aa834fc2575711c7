// Batch front door for the latent Gaussian inference engine:
//   inla fit      -- fit a model spec + csv data, persist the result
//   inla summary  -- render a persisted result as fixed-width tables
//   inla predict  -- posterior predictive for one observation
//   inla mcmc     -- Metropolis-Hastings over a conditioned fixed effect
//   inla marginal -- Table-style operations on a two-column marginal file
//   inla plotdata -- dump mixture and per-support-point curves for plotting

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "inla/inla.hpp"

namespace fs = std::filesystem;
using namespace inla;

namespace {

int thread_default() {
    if (const char* env = std::getenv("INLA_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

IntegrationOptions integration_options(const std::string& strategy, double step, double cutoff,
                                       double f0, int threads) {
    IntegrationOptions o;
    o.strategy = strategy;
    o.grid_step = step;
    o.grid_cutoff = cutoff;
    o.ccd_f0 = f0;
    o.threads = threads;
    return o;
}

void dump_marginal(std::ostream& os, const Marginal& m) {
    char buf[96];
    for (size_t i = 0; i < m.xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", m.xs[i], m.ds[i]);
        os << buf;
    }
}

std::function<double(double)> named_function(const std::string& name) {
    if (name == "identity") return [](double x) { return x; };
    if (name == "exp") return [](double x) { return std::exp(x); };
    if (name == "log") return [](double x) { return std::log(x); };
    if (name == "sqrt") return [](double x) { return std::sqrt(x); };
    if (name == "inv") return [](double x) { return 1.0 / x; };
    if (name == "invsqrt") return [](double x) { return 1.0 / std::sqrt(x); };
    throw ValidationError("unknown function '" + name +
                          "' (use identity|exp|log|sqrt|inv|invsqrt)");
}

int cmd_fit(const std::string& spec_path, const std::string& data_path, const std::string& out,
            const std::string& strategy, const std::string& latent, double step, double cutoff,
            double f0, int threads, std::uint64_t seed, bool keep_conditionals,
            const std::string& dump_precision) {
    LatentGaussianModel m = load_model(spec_path, data_path);
    FitOptions opt;
    opt.integration = integration_options(strategy, step, cutoff, f0, threads);
    opt.latent = latent;
    opt.seed = seed;
    opt.keep_conditionals = keep_conditionals;
    if (!dump_precision.empty()) {
        std::ofstream f(dump_precision);
        if (!f) throw IoError("cannot write '" + dump_precision + "'");
        m.assemble_joint_precision(std::vector<double>(m.theta_dim(), 0.0)).dump_matrix_market(f);
    }
    FitResult fr = fit_model(m, opt);
    write_fit_result(out, fr);
    std::fprintf(stderr, "fit: %d observations, %d latent, %d hyper; %zu support points; %.2fs\n",
                 fr.n_obs, fr.n_latent, fr.theta_dim, fr.support_points.size(), fr.t_total);
    std::cout << render_summary(read_fit_result(out));
    return 0;
}

int cmd_summary(const std::string& result_dir) {
    std::cout << render_summary(read_fit_result(result_dir));
    return 0;
}

int cmd_predict(const std::string& result_dir, int index, int samples, std::uint64_t seed,
                int k_max) {
    LoadedResult res = read_fit_result(result_dir);
    if (index < 1 || index > res.n_obs())
        throw ValidationError("predict: --index must be in 1.." + std::to_string(res.n_obs()));
    Marginal obs_scale = res.fitted(index - 1);
    LikelihoodFamily fam = res.family() == "poisson"
                               ? LikelihoodFamily::poisson()
                               : LikelihoodFamily::gaussian_known(1.0);
    if (res.family() != "poisson")
        throw ValidationError(
            "predict: only the poisson predictive is exposed through the CLI; gaussian models "
            "with a precision hyperparameter need joint sampling");

    if (samples > 0) {
        auto draws = predictive_by_sampling(obs_scale, fam, samples, seed);
        char buf[40];
        for (double d : draws) {
            std::snprintf(buf, sizeof buf, "%.17g\n", d);
            std::cout << buf;
        }
        return 0;
    }
    auto pd = predictive_by_quadrature(obs_scale, fam, k_max);
    char buf[64];
    std::cout << "y probability\n";
    for (size_t j = 0; j < pd.support.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%d %.17g\n", static_cast<int>(pd.support[j]), pd.mass[j]);
        std::cout << buf;
    }
    std::fprintf(stderr, "predictive mean %.4f variance %.4f\n", pd.mean(), pd.variance());
    return 0;
}

int cmd_mcmc(const std::string& spec_path, const std::string& data_path,
             const std::string& condition, double prior_mean, double prior_sd, int iters,
             int burn_in, int thin, double scale, std::uint64_t seed,
             const std::vector<int>& track, const std::string& strategy, double step,
             double cutoff, double f0, int threads, const std::string& out) {
    KvNode spec = load_spec_file(spec_path);
    CsvTable data = read_csv_file(data_path);
    LatentGaussianModel base = build_model(spec, data);

    // locate the conditioned component and its covariate values
    int comp_idx = -1;
    for (size_t c = 0; c < base.components.size(); ++c)
        if (base.components[c].name == condition) comp_idx = static_cast<int>(c);
    if (comp_idx < 0)
        throw ValidationError("mcmc: no component named '" + condition + "' to condition on");
    const auto& target = base.components[comp_idx];
    if (target.kind != ComponentKind::Intercept && target.kind != ComponentKind::FixedEffect)
        throw ValidationError("mcmc: conditioning is supported on intercept/fixed components");
    std::vector<double> zcol(base.n_obs(), 1.0);
    if (target.kind == ComponentKind::FixedEffect) zcol = target.covariate;

    ConditionedModel cm;
    cm.dim_zc = 1;
    cm.log_prior = [prior_mean, prior_sd](const std::vector<double>& zc) {
        double z = (zc[0] - prior_mean) / prior_sd;
        return -0.5 * z * z - std::log(prior_sd) - 0.5 * std::log(2.0 * M_PI);
    };
    cm.build = [spec, data, condition, zcol](const std::vector<double>& zc) {
        LatentGaussianModel m = build_model(spec, data);
        std::vector<LatentComponent> keep;
        for (auto& c : m.components)
            if (c.name != condition) keep.push_back(c);
        m.components = std::move(keep);
        for (int i = 0; i < m.n_obs(); ++i) m.observations[i].offset = zc[0] * zcol[i];
        m.validate();
        return m;
    };

    McmcOptions opt;
    opt.iterations = iters;
    opt.burn_in = burn_in;
    opt.thin = thin;
    opt.kernel_scale = scale;
    opt.seed = seed;
    opt.tracked = track;
    opt.integration = integration_options(strategy, step, cutoff, f0, threads);

    ChainRecord rec = run_chain(cm, opt);

    fs::create_directories(out);
    std::ofstream chain(fs::path(out) / "chain.csv");
    chain << "iteration";
    for (int j = 0; j < cm.dim_zc; ++j) chain << ",zc" << j + 1;
    chain << ",log_target,accepted\n";
    char buf[96];
    for (size_t it = 0; it < rec.zc.size(); ++it) {
        chain << it + 1;
        for (double v : rec.zc[it]) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            chain << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%d\n", rec.log_target[it],
                      rec.accepted[it] ? 1 : 0);
        chain << buf;
    }
    for (int idx : track) {
        std::ofstream bma(fs::path(out) / ("bma_" + std::to_string(idx) + ".txt"));
        dump_marginal(bma, bma_marginal(rec, idx));
    }
    std::fprintf(stderr, "mcmc: acceptance %.3f over %d iterations (%d failed fits)%s\n",
                 rec.acceptance_rate, iters, rec.failed_fits,
                 rec.low_acceptance_warning ? " [warning: acceptance below 1%]" : "");
    return 0;
}

int cmd_marginal(const std::string& op, const std::string& file,
                 const std::vector<double>& at, const std::string& fun, int n,
                 std::uint64_t seed, double p, int points) {
    Marginal m = read_marginal_file(file);
    char buf[96];
    auto print_pairs = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
        for (size_t i = 0; i < xs.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", xs[i], ys[i]);
            std::cout << buf;
        }
    };
    if (op == "density") {
        print_pairs(at, density_at(m, at));
    } else if (op == "cdf") {
        print_pairs(at, cdf_at(m, at));
    } else if (op == "quantile") {
        print_pairs(at, quantile_at(m, at));
    } else if (op == "sample") {
        for (double v : sample(m, n, seed)) {
            std::snprintf(buf, sizeof buf, "%.17g\n", v);
            std::cout << buf;
        }
    } else if (op == "hpd") {
        auto [lo, hi] = hpd_interval(m, p);
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", lo, hi);
        std::cout << buf;
    } else if (op == "expect") {
        double v = expect_scalar(m, named_function(fun));
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        std::cout << buf;
    } else if (op == "mode") {
        std::snprintf(buf, sizeof buf, "%.17g\n", mode_of(m));
        std::cout << buf;
    } else if (op == "transform") {
        dump_marginal(std::cout, transform(m, named_function(fun)));
    } else if (op == "smooth") {
        dump_marginal(std::cout, smooth(m, points));
    } else if (op == "summary") {
        auto s = summarize(m);
        std::snprintf(buf, sizeof buf, "Mean            %g\n", s.mean);
        std::cout << buf;
        std::snprintf(buf, sizeof buf, "Stdev           %g\n", s.sd);
        std::cout << buf;
        std::snprintf(buf, sizeof buf, "Quantile  0.025 %g\n", s.q025);
        std::cout << buf;
        std::snprintf(buf, sizeof buf, "Quantile  0.25  %g\n", s.q25);
        std::cout << buf;
        std::snprintf(buf, sizeof buf, "Quantile  0.5   %g\n", s.q5);
        std::cout << buf;
        std::snprintf(buf, sizeof buf, "Quantile  0.75  %g\n", s.q75);
        std::cout << buf;
        std::snprintf(buf, sizeof buf, "Quantile  0.975 %g\n", s.q975);
        std::cout << buf;
    } else {
        throw ValidationError("unknown marginal operation '" + op + "'");
    }
    return 0;
}

int cmd_plotdata(const std::string& result_dir, const std::string& which,
                 const std::string& out) {
    LoadedResult res = read_fit_result(result_dir);
    const KvNode& root = res.root();

    // which = predictor:<i> | fixed:<name> | random:<comp>:<j> | hyper:<slot>
    auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : s) {
            if (c == ':') {
                parts.push_back(cur);
                cur.clear();
            } else
                cur.push_back(c);
        }
        parts.push_back(cur);
        return parts;
    };
    auto parts = split(which);
    std::string marg_file;
    int latent_index = -1;
    char buf[96];
    if (parts[0] == "predictor" && parts.size() == 2) {
        int i = std::atoi(parts[1].c_str());
        std::snprintf(buf, sizeof buf, "predictor_%03d.txt", i);
        marg_file = buf;
        latent_index = i - 1;
    } else if (parts[0] == "fixed" && parts.size() == 2) {
        marg_file = "fixed_" + parts[1] + ".txt";
        const KvNode& c = root.at("model").at("components").at(parts[1]);
        latent_index = static_cast<int>(c.at("offset").as_int());
    } else if (parts[0] == "random" && parts.size() == 3) {
        int j = std::atoi(parts[2].c_str());
        std::snprintf(buf, sizeof buf, "random_%s_%03d.txt", parts[1].c_str(), j);
        marg_file = buf;
        const KvNode& c = root.at("model").at("components").at(parts[1]);
        latent_index = static_cast<int>(c.at("offset").as_int()) + j - 1;
    } else if (parts[0] == "hyper" && parts.size() == 2) {
        marg_file = "hyper_" + parts[1] + "_precision.txt";
        latent_index = -1;  // no conditional curves for hyper marginals
    } else {
        throw ValidationError("plotdata: bad --which '" + which + "'");
    }

    fs::create_directories(out);
    Marginal mixture = res.marginal(marg_file);
    {
        std::ofstream f(fs::path(out) / "marginal.txt");
        dump_marginal(f, mixture);
    }
    if (latent_index < 0) return 0;

    if (root.at("conditionals_kept").as_int() != 1)
        throw ValidationError(
            "plotdata: per-support-point curves need a fit run with --keep-conditionals");

    const KvNode& sp = root.at("support_points");
    const int K = static_cast<int>(sp.children.size());
    std::vector<Marginal> conds;
    std::vector<double> w;
    for (int k = 0; k < K; ++k) {
        std::snprintf(buf, sizeof buf, "cond_%04d_%03d.txt", latent_index, k + 1);
        conds.push_back(res.marginal(buf));
        w.push_back(sp.children[k].at("normalized_weight").as_double());
        std::snprintf(buf, sizeof buf, "conditional_%03d.txt", k + 1);
        std::ofstream f(fs::path(out) / buf);
        dump_marginal(f, conds.back());
    }
    // weighted curves scaled so their pointwise sum reproduces the mixture
    std::vector<std::vector<double>> interp(K);
    std::vector<double> total(mixture.xs.size(), 0.0);
    for (int k = 0; k < K; ++k) {
        interp[k] = density_at(conds[k], mixture.xs);
        for (size_t i = 0; i < total.size(); ++i) total[i] += w[k] * interp[k][i];
    }
    double z = 1.0 / trapezoid(mixture.xs, total);
    for (int k = 0; k < K; ++k) {
        std::snprintf(buf, sizeof buf, "weighted_%03d.txt", k + 1);
        std::ofstream f(fs::path(out) / buf);
        char line[96];
        for (size_t i = 0; i < mixture.xs.size(); ++i) {
            std::snprintf(line, sizeof line, "%.17g %.17g\n", mixture.xs[i],
                          z * w[k] * interp[k][i]);
            f << line;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic Bayesian inference for latent Gaussian models"};
    app.require_subcommand(1);

    int threads = thread_default();

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "fit a model and persist the result");
    std::string spec_path, data_path, out_dir = "inla-out", strategy = "auto",
                latent = "gaussian", dump_precision;
    double step = 1.0, cutoff = 2.5, f0 = 1.2;
    std::uint64_t seed = 0;
    bool keep_conditionals = false;
    fit->add_option("--model", spec_path, "model spec file")->required();
    fit->add_option("--data", data_path, "csv data file")->required();
    fit->add_option("--out", out_dir, "output directory");
    fit->add_option("--strategy", strategy, "grid|ccd|eb|auto");
    fit->add_option("--latent", latent, "gaussian|laplace");
    fit->add_option("--grid-step", step, "grid spacing in z units");
    fit->add_option("--grid-cutoff", cutoff, "log-density drop that stops the grid");
    fit->add_option("--ccd-f0", f0, "ccd shell scaling (> 1)");
    fit->add_option("--threads", threads, "worker threads (default INLA_THREADS or 1)");
    fit->add_option("--seed", seed, "seed recorded in the result");
    fit->add_flag("--keep-conditionals", keep_conditionals,
                  "persist per-support-point latent marginals (needed by plotdata)");
    fit->add_option("--dump-precision", dump_precision,
                    "debug: write the joint precision at theta = 0 in matrix-market form");

    // ---- summary ----
    auto* summary = app.add_subcommand("summary", "render a persisted result");
    std::string result_dir;
    summary->add_option("--result", result_dir, "result directory")->required();

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "posterior predictive for one observation");
    int pred_index = 1, pred_samples = 0, pred_kmax = 100;
    std::uint64_t pred_seed = 0;
    std::string pred_result;
    predict->add_option("--result", pred_result, "result directory")->required();
    predict->add_option("--index", pred_index, "observation index (1-based)")->required();
    predict->add_option("--samples", pred_samples, "emit raw samples instead of the pmf");
    predict->add_option("--seed", pred_seed, "sampling seed");
    predict->add_option("--kmax", pred_kmax, "largest count in the quadrature pmf");

    // ---- mcmc ----
    auto* mcmc = app.add_subcommand("mcmc", "Metropolis-Hastings over a conditioned effect");
    std::string mcmc_spec, mcmc_data, mcmc_cond, mcmc_out = "mcmc-out",
                mcmc_strategy = "auto";
    double prior_mean = 0.0, prior_sd = 10.0, mcmc_scale = 0.5, mcmc_step = 1.0,
           mcmc_cutoff = 2.5, mcmc_f0 = 1.2;
    int iters = 1000, burn_in = -1, thin = 1;
    std::uint64_t mcmc_seed = 0;
    std::vector<int> track;
    mcmc->add_option("--model", mcmc_spec, "model spec file")->required();
    mcmc->add_option("--data", mcmc_data, "csv data file")->required();
    mcmc->add_option("--condition", mcmc_cond, "intercept/fixed component to condition on")
        ->required();
    mcmc->add_option("--prior-mean", prior_mean, "gaussian prior mean for z_c");
    mcmc->add_option("--prior-sd", prior_sd, "gaussian prior sd for z_c");
    mcmc->add_option("--iters", iters, "iterations")->required();
    mcmc->add_option("--burn-in", burn_in, "burn-in (default 10%)");
    mcmc->add_option("--thin", thin, "thinning stride");
    mcmc->add_option("--scale", mcmc_scale, "random-walk kernel scale");
    mcmc->add_option("--seed", mcmc_seed, "chain seed");
    mcmc->add_option("--track", track, "latent indices whose marginals are averaged");
    mcmc->add_option("--strategy", mcmc_strategy, "integration strategy for conditional fits");
    mcmc->add_option("--grid-step", mcmc_step, "grid spacing");
    mcmc->add_option("--grid-cutoff", mcmc_cutoff, "grid cutoff");
    mcmc->add_option("--ccd-f0", mcmc_f0, "ccd shell scaling");
    mcmc->add_option("--threads", threads, "worker threads");
    mcmc->add_option("--out", mcmc_out, "output directory");

    // ---- marginal ----
    auto* marg = app.add_subcommand("marginal", "operations on a two-column marginal file");
    std::string marg_op, marg_file, marg_fun = "identity";
    std::vector<double> marg_at;
    int marg_n = 10, marg_points = 301;
    std::uint64_t marg_seed = 0;
    double marg_p = 0.95;
    marg->add_option("op", marg_op,
                     "density|cdf|quantile|sample|hpd|expect|mode|transform|smooth|summary")
        ->required();
    marg->add_option("file", marg_file, "two-column marginal file")->required();
    marg->add_option("--at", marg_at, "evaluation points / probabilities");
    marg->add_option("--fun", marg_fun, "identity|exp|log|sqrt|inv|invsqrt");
    marg->add_option("--n", marg_n, "sample count");
    marg->add_option("--seed", marg_seed, "sampling seed");
    marg->add_option("--p", marg_p, "hpd mass");
    marg->add_option("--points", marg_points, "smooth output points");

    // ---- plotdata ----
    auto* plot = app.add_subcommand("plotdata", "dump marginal + conditional curves");
    std::string plot_result, plot_which, plot_out = "plot-out";
    plot->add_option("--result", plot_result, "result directory")->required();
    plot->add_option("--which", plot_which, "predictor:<i>|fixed:<name>|random:<c>:<j>|hyper:<s>")
        ->required();
    plot->add_option("--out", plot_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit)
            return cmd_fit(spec_path, data_path, out_dir, strategy, latent, step, cutoff, f0,
                           threads, seed, keep_conditionals, dump_precision);
        if (*summary) return cmd_summary(result_dir);
        if (*predict)
            return cmd_predict(pred_result, pred_index, pred_samples, pred_seed, pred_kmax);
        if (*mcmc)
            return cmd_mcmc(mcmc_spec, mcmc_data, mcmc_cond, prior_mean, prior_sd, iters,
                            burn_in, thin, mcmc_scale, mcmc_seed, track, mcmc_strategy,
                            mcmc_step, mcmc_cutoff, mcmc_f0, threads, mcmc_out);
        if (*marg)
            return cmd_marginal(marg_op, marg_file, marg_at, marg_fun, marg_n, marg_seed,
                                marg_p, marg_points);
        if (*plot) return cmd_plotdata(plot_result, plot_which, plot_out);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error (validation): %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error (numerical): %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error (io): %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
