#ifndef INLA_FIT_HPP
#define INLA_FIT_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "inla/integration.hpp"
#include "inla/kvtree.hpp"
#include "inla/latent_marginals.hpp"
#include "inla/marginal.hpp"
#include "inla/model.hpp"
#include "inla/parallel.hpp"

namespace inla {

struct FitOptions {
    IntegrationOptions integration;
    std::string latent = "gaussian";  // gaussian | laplace
    std::uint64_t seed = 0;           // recorded in the result document
    bool keep_conditionals = false;
    std::vector<double> theta_init;   // default: zeros
};

struct ComponentInfo {
    std::string name;
    std::string kind;
    int size = 1;
    int offset = 0;  // position inside the latent vector
};

struct SummaryRow {
    std::string name;
    MarginalSummary stats;
};

/// Everything a fit produces: metadata, summaries, marginals, support
/// points, and (optionally) the per-support-point conditional marginals.
struct FitResult {
    std::string family;
    std::string strategy_used;
    std::string latent_method;
    double grid_step = 1.0, grid_cutoff = 2.5, ccd_f0 = 1.2;
    std::uint64_t seed = 0;
    int n_obs = 0, n_latent = 0, theta_dim = 0;
    std::vector<ComponentInfo> components;

    std::vector<double> theta_mode;
    double log_marginal_likelihood = 0.0;
    std::vector<SupportPoint> support_points;
    std::vector<double> weights;  // normalized

    std::vector<Marginal> predictor;  // per observation, offsets applied
    std::vector<Marginal> fitted;     // observation (link-inverse) scale
    std::vector<std::vector<Marginal>> component_marginals;  // per component, per element
    std::vector<Marginal> hyper_precision_marginals;         // per slot, precision scale
    std::vector<std::string> hyper_names;

    std::vector<SummaryRow> summary_fixed;
    std::vector<SummaryRow> summary_hyper;
    std::vector<std::vector<SummaryRow>> summary_random;  // aligned with random components
    std::vector<SummaryRow> summary_predictor;

    // conditionals[k][i]: latent marginal at support point k, latent index i
    std::vector<std::vector<Marginal>> conditionals;
    bool conditionals_kept = false;

    double t_mode = 0.0, t_integration = 0.0, t_marginals = 0.0, t_total = 0.0;
};

inline Marginal shift_marginal(const Marginal& m, double offset) {
    if (offset == 0.0) return m;
    Marginal out = m;
    for (auto& x : out.xs) x += offset;
    return out;
}

/// Hyperparameter marginal on the internal log-precision scale. Empirical
/// Bayes keeps only the Hessian's Gaussian; the other strategies use the
/// recorded evaluations / support points.
inline Marginal theta_slot_marginal(const ThetaPosterior& tp, int slot,
                                    const std::string& strategy) {
    if (strategy == "eb") {
        double sd = tp.slot_sd(slot);
        if (!(sd > 0.0)) throw NumericalError("theta marginal: degenerate Hessian");
        return gaussian_marginal(tp.mode()[slot], sd * sd, 101);
    }
    return normalized_theta_marginal(tp, slot);
}

inline FitResult fit_model(const LatentGaussianModel& m, const FitOptions& opt) {
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };
    const auto t0 = clock::now();

    if (opt.latent != "gaussian" && opt.latent != "laplace")
        throw ValidationError("fit: latent strategy must be 'gaussian' or 'laplace'");

    FitResult fr;
    fr.family = m.likelihood.name();
    fr.latent_method = opt.latent;
    fr.grid_step = opt.integration.grid_step;
    fr.grid_cutoff = opt.integration.grid_cutoff;
    fr.ccd_f0 = opt.integration.ccd_f0;
    fr.seed = opt.seed;
    fr.n_obs = m.n_obs();
    fr.n_latent = m.n_latent();
    fr.theta_dim = m.theta_dim();
    fr.hyper_names = m.hyper_names();
    for (size_t k = 0; k < m.components.size(); ++k)
        fr.components.push_back({m.components[k].name, component_kind_name(m.components[k].kind),
                                 m.components[k].size, m.component_offset(static_cast<int>(k))});

    // step 1: explore the hyperparameter posterior
    ModelEvaluator ev(m);
    std::vector<double> init =
        opt.theta_init.empty() ? std::vector<double>(m.theta_dim(), 0.0) : opt.theta_init;
    if (static_cast<int>(init.size()) != m.theta_dim())
        throw ValidationError("fit: theta_init dimension mismatch");
    auto tp = find_mode_theta(ev, init);
    fr.theta_mode = tp->mode();
    const auto t1 = clock::now();
    fr.t_mode = seconds(t0, t1);

    // step 2: support points and their weights
    auto pts = run_strategy(*tp, opt.integration);
    fr.support_points = pts;
    fr.weights = normalized_weights(pts);
    fr.log_marginal_likelihood = log_marginal_likelihood(*tp);
    if (m.theta_dim() == 0)
        fr.strategy_used = "eb";
    else if (opt.integration.strategy == "auto")
        fr.strategy_used = m.theta_dim() <= 2 ? "grid" : "ccd";
    else if (opt.integration.strategy == "ccd" && m.theta_dim() == 1)
        fr.strategy_used = "grid";  // ccd falls back in one dimension
    else
        fr.strategy_used = opt.integration.strategy;
    const auto t2 = clock::now();
    fr.t_integration = seconds(t1, t2);

    // step 3: conditional latent marginals per support point
    const int K = static_cast<int>(pts.size());
    const int n = m.n_latent();
    fr.conditionals.assign(K, {});
    parallel_for(K, opt.integration.threads, [&](int k) {
        std::vector<Marginal> row;
        row.reserve(n);
        if (opt.latent == "gaussian") {
            auto cg = ev.conditional(pts[k].theta);
            auto vars = cg.variances();
            for (int i = 0; i < n; ++i)
                row.push_back(gaussian_latent_marginal(cg, vars, i));
        } else {
            for (int i = 0; i < n; ++i)
                row.push_back(laplace_latent_marginal(m, pts[k].theta, i));
        }
        fr.conditionals[k] = std::move(row);
    });

    // step 4: mix across support points
    std::vector<Marginal> mixed;
    mixed.reserve(n);
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<Marginal, double>> parts;
        parts.reserve(K);
        for (int k = 0; k < K; ++k) parts.emplace_back(fr.conditionals[k][i], fr.weights[k]);
        mixed.push_back(mix_marginals(parts));
    }

    for (int i = 0; i < fr.n_obs; ++i) {
        Marginal pm = shift_marginal(mixed[m.observations[i].predictor_index],
                                     m.observations[i].offset);
        fr.fitted.push_back(m.likelihood.is_poisson()
                                ? transform(pm, [](double x) { return std::exp(x); })
                                : pm);
        fr.predictor.push_back(std::move(pm));
        char buf[32];
        std::snprintf(buf, sizeof buf, "Predictor.%02d", i + 1);
        fr.summary_predictor.push_back({buf, summarize(fr.predictor.back())});
    }

    for (size_t c = 0; c < m.components.size(); ++c) {
        const auto& comp = m.components[c];
        int off = m.component_offset(static_cast<int>(c));
        std::vector<Marginal> ms;
        for (int j = 0; j < comp.size; ++j) ms.push_back(mixed[off + j]);
        if (comp.kind == ComponentKind::Intercept || comp.kind == ComponentKind::FixedEffect) {
            fr.summary_fixed.push_back({comp.name, summarize(ms[0])});
        } else {
            std::vector<SummaryRow> rows;
            for (int j = 0; j < comp.size; ++j)
                rows.push_back({comp.name + "." + std::to_string(j + 1), summarize(ms[j])});
            fr.summary_random.push_back(std::move(rows));
        }
        fr.component_marginals.push_back(std::move(ms));
    }

    for (int s = 0; s < m.theta_dim(); ++s) {
        Marginal theta_m = theta_slot_marginal(*tp, s, fr.strategy_used);
        Marginal prec_m = transform(theta_m, [](double x) { return std::exp(x); });
        fr.summary_hyper.push_back({m.hyper_names()[s], summarize(prec_m)});
        fr.hyper_precision_marginals.push_back(std::move(prec_m));
    }

    fr.conditionals_kept = opt.keep_conditionals;
    if (!opt.keep_conditionals) fr.conditionals.clear();
    const auto t3 = clock::now();
    fr.t_marginals = seconds(t2, t3);
    fr.t_total = seconds(t0, t3);
    return fr;
}

// ---------------------------------------------------------------------------
// persistence: one key-value document plus two-column marginal sidecars
// ---------------------------------------------------------------------------

inline void write_marginal_file(const std::string& path, const Marginal& m) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path + "'");
    char buf[96];
    for (size_t i = 0; i < m.xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", m.xs[i], m.ds[i]);
        f << buf;
    }
}

inline Marginal read_marginal_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read marginal file '" + path + "'");
    std::vector<double> xs, ds;
    double x, d;
    while (f >> x >> d) {
        xs.push_back(x);
        ds.push_back(d);
    }
    if (xs.size() < 9) throw IoError("marginal file '" + path + "' has fewer than 9 rows");
    return make_marginal(std::move(xs), std::move(ds));
}

namespace detail {

inline void add_summary(KvNode& parent, const SummaryRow& row) {
    KvNode& r = parent.add(row.name);
    r.add_double("mean", row.stats.mean);
    r.add_double("sd", row.stats.sd);
    r.add_double("q0.025", row.stats.q025);
    r.add_double("q0.25", row.stats.q25);
    r.add_double("q0.5", row.stats.q5);
    r.add_double("q0.75", row.stats.q75);
    r.add_double("q0.975", row.stats.q975);
    r.add_double("mode", row.stats.mode);
}

inline SummaryRow read_summary(const KvNode& r) {
    SummaryRow row;
    row.name = r.key;
    row.stats.mean = r.at("mean").as_double();
    row.stats.sd = r.at("sd").as_double();
    row.stats.q025 = r.at("q0.025").as_double();
    row.stats.q25 = r.at("q0.25").as_double();
    row.stats.q5 = r.at("q0.5").as_double();
    row.stats.q75 = r.at("q0.75").as_double();
    row.stats.q975 = r.at("q0.975").as_double();
    row.stats.mode = r.at("mode").as_double();
    return row;
}

inline std::string joined_doubles(const std::vector<double>& v) {
    std::string s;
    char buf[40];
    for (size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        if (i) s += ' ';
        s += buf;
    }
    return s;
}

inline std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    double v;
    while (is >> v) out.push_back(v);
    return out;
}

}  // namespace detail

/// Persist a fit under `dir`: result.txt (deterministic), marginals/*.txt,
/// and timings.txt (wall-clock, deliberately outside the result document so
/// repeated runs stay byte-identical).
inline void write_fit_result(const std::string& dir, const FitResult& fr) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "marginals");

    KvNode root;
    root.add_int("inla_result", 1);
    KvNode& model = root.child("model");
    model.add("family", fr.family);
    model.add_int("n_observations", fr.n_obs);
    model.add_int("n_latent", fr.n_latent);
    model.add_int("theta_dim", fr.theta_dim);
    KvNode& comps = model.child("components");
    for (const auto& c : fr.components) {
        KvNode& cn = comps.add(c.name);
        cn.add("kind", c.kind);
        cn.add_int("size", c.size);
        cn.add_int("offset", c.offset);
    }
    KvNode& strat = root.child("strategy");
    strat.add("integration", fr.strategy_used);
    strat.add("latent", fr.latent_method);
    strat.add_double("grid_step", fr.grid_step);
    strat.add_double("grid_cutoff", fr.grid_cutoff);
    strat.add_double("ccd_f0", fr.ccd_f0);
    strat.add_int("seed", static_cast<long>(fr.seed));

    if (!fr.theta_mode.empty()) root.add("theta_mode", detail::joined_doubles(fr.theta_mode));
    root.add_double("log_marginal_likelihood", fr.log_marginal_likelihood);

    KvNode& sp = root.child("support_points");
    for (size_t k = 0; k < fr.support_points.size(); ++k) {
        KvNode& p = sp.add("p" + std::to_string(k + 1));
        p.add("theta", detail::joined_doubles(fr.support_points[k].theta));
        p.add("z", detail::joined_doubles(fr.support_points[k].z));
        p.add_double("log_post", fr.support_points[k].log_post);
        p.add_double("weight", fr.support_points[k].weight);
        p.add_double("normalized_weight", fr.weights[k]);
    }

    KvNode& sumf = root.child("summary_fixed");
    for (const auto& r : fr.summary_fixed) detail::add_summary(sumf, r);
    KvNode& sumh = root.child("summary_hyper");
    for (const auto& r : fr.summary_hyper) detail::add_summary(sumh, r);
    KvNode& sumr = root.child("summary_random");
    {
        size_t rc = 0;
        for (const auto& c : fr.components) {
            if (c.kind != "iid" && c.kind != "rw2") continue;
            KvNode& cn = sumr.add(c.name);
            cn.add("model", c.kind == "iid" ? "IID model" : "RW2 model");
            KvNode& rows = cn.child("elements");
            for (const auto& r : fr.summary_random[rc]) detail::add_summary(rows, r);
            ++rc;
        }
    }
    KvNode& sump = root.child("summary_predictor");
    for (const auto& r : fr.summary_predictor) detail::add_summary(sump, r);
    root.add_int("conditionals_kept", fr.conditionals_kept ? 1 : 0);

    std::ofstream doc(fs::path(dir) / "result.txt");
    if (!doc) throw IoError("cannot write result document under '" + dir + "'");
    kv_write(doc, root);

    auto mpath = [&](const std::string& name) {
        return (fs::path(dir) / "marginals" / name).string();
    };
    char buf[64];
    for (int i = 0; i < fr.n_obs; ++i) {
        std::snprintf(buf, sizeof buf, "predictor_%03d.txt", i + 1);
        write_marginal_file(mpath(buf), fr.predictor[i]);
        std::snprintf(buf, sizeof buf, "fitted_%03d.txt", i + 1);
        write_marginal_file(mpath(buf), fr.fitted[i]);
    }
    for (size_t c = 0; c < fr.components.size(); ++c) {
        const auto& info = fr.components[c];
        if (info.kind == "intercept" || info.kind == "fixed") {
            write_marginal_file(mpath("fixed_" + info.name + ".txt"),
                                fr.component_marginals[c][0]);
        } else {
            for (int j = 0; j < info.size; ++j) {
                std::snprintf(buf, sizeof buf, "random_%s_%03d.txt", info.name.c_str(), j + 1);
                write_marginal_file(mpath(buf), fr.component_marginals[c][j]);
            }
        }
    }
    for (size_t s = 0; s < fr.hyper_precision_marginals.size(); ++s) {
        std::snprintf(buf, sizeof buf, "hyper_%zu_precision.txt", s + 1);
        write_marginal_file(mpath(buf), fr.hyper_precision_marginals[s]);
    }
    if (fr.conditionals_kept) {
        for (size_t k = 0; k < fr.conditionals.size(); ++k)
            for (size_t i = 0; i < fr.conditionals[k].size(); ++i) {
                std::snprintf(buf, sizeof buf, "cond_%04zu_%03zu.txt", i, k + 1);
                write_marginal_file(mpath(buf), fr.conditionals[k][i]);
            }
    }

    std::ofstream times(fs::path(dir) / "timings.txt");
    std::snprintf(buf, sizeof buf, "mode_search_s: %.3f\n", fr.t_mode);
    times << buf;
    std::snprintf(buf, sizeof buf, "integration_s: %.3f\n", fr.t_integration);
    times << buf;
    std::snprintf(buf, sizeof buf, "marginals_s: %.3f\n", fr.t_marginals);
    times << buf;
    std::snprintf(buf, sizeof buf, "total_s: %.3f\n", fr.t_total);
    times << buf;
}

/// Lazily loaded persisted result: the document plus marginal-file access.
struct LoadedResult {
    std::string dir;
    KvNode doc;

    const KvNode& root() const { return doc; }
    std::string family() const { return doc.at("model").at("family").value; }
    int n_obs() const { return static_cast<int>(doc.at("model").at("n_observations").as_int()); }

    Marginal marginal(const std::string& name) const {
        return read_marginal_file((std::filesystem::path(dir) / "marginals" / name).string());
    }
    Marginal predictor(int i) const {
        char buf[64];
        std::snprintf(buf, sizeof buf, "predictor_%03d.txt", i + 1);
        return marginal(buf);
    }
    Marginal fitted(int i) const {
        char buf[64];
        std::snprintf(buf, sizeof buf, "fitted_%03d.txt", i + 1);
        return marginal(buf);
    }
};

inline LoadedResult read_fit_result(const std::string& dir) {
    std::ifstream doc(std::filesystem::path(dir) / "result.txt");
    if (!doc) throw IoError("no result document under '" + dir + "'");
    return LoadedResult{dir, kv_parse(doc)};
}

/// Fixed-width summary rendering of a persisted result.
inline std::string render_summary(const LoadedResult& res) {
    std::ostringstream os;
    char buf[256];
    auto table = [&](const KvNode& rows) {
        std::snprintf(buf, sizeof buf, "%-18s %9s %9s %10s %9s %10s %9s\n", "", "mean", "sd",
                      "0.025quant", "0.5quant", "0.975quant", "mode");
        os << buf;
        for (const auto& r : rows.children) {
            auto row = detail::read_summary(r);
            std::snprintf(buf, sizeof buf, "%-18s %9.4g %9.4g %10.4g %9.4g %10.4g %9.4g\n",
                          row.name.c_str(), row.stats.mean, row.stats.sd, row.stats.q025,
                          row.stats.q5, row.stats.q975, row.stats.mode);
            os << buf;
        }
    };

    const KvNode& root = res.root();
    os << "Fixed effects:\n";
    table(root.at("summary_fixed"));

    const KvNode& rnd = root.at("summary_random");
    if (!rnd.children.empty()) {
        os << "\nRandom effects:\nName\t  Model\n";
        for (const auto& c : rnd.children)
            os << " " << c.key << "   " << c.at("model").value << "\n";
    }

    const KvNode& hyp = root.at("summary_hyper");
    if (!hyp.children.empty()) {
        os << "\nModel hyperparameters:\n";
        table(hyp);
    }

    std::snprintf(buf, sizeof buf, "\nMarginal log-Likelihood:  %.2f\n",
                  root.at("log_marginal_likelihood").as_double());
    os << buf;
    return os.str();
}

}  // namespace inla

#endif
