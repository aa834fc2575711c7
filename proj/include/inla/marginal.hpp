#ifndef INLA_MARGINAL_HPP
#define INLA_MARGINAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "inla/errors.hpp"
#include "inla/optim.hpp"
#include "inla/rng.hpp"
#include "inla/spline.hpp"

namespace inla {

/// A tabulated univariate density: ascending abscissae plus nonnegative
/// ordinates, normalized so the trapezoid integral is 1. This is the
/// universal currency for posterior marginals.
struct Marginal {
    std::vector<double> xs;
    std::vector<double> ds;
};

inline double trapezoid(const std::vector<double>& xs, const std::vector<double>& ds) {
    double s = 0.0;
    for (size_t i = 0; i + 1 < xs.size(); ++i)
        s += 0.5 * (ds[i] + ds[i + 1]) * (xs[i + 1] - xs[i]);
    return s;
}

/// Validate and normalize a tabulation into a Marginal.
inline Marginal make_marginal(std::vector<double> xs, std::vector<double> ds) {
    if (xs.size() < 9) throw ValidationError("Marginal: need at least 9 grid points");
    if (xs.size() != ds.size()) throw ValidationError("Marginal: xs/ds size mismatch");
    for (size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ds[i]))
            throw ValidationError("Marginal: non-finite entry");
        if (ds[i] < 0.0) {
            if (ds[i] < -1e-12) throw ValidationError("Marginal: negative density");
            ds[i] = 0.0;
        }
        if (i > 0 && !(xs[i] > xs[i - 1]))
            throw ValidationError("Marginal: abscissae must be strictly ascending");
    }
    double z = trapezoid(xs, ds);
    if (!(z > 0.0)) throw ValidationError("Marginal: zero mass");
    for (auto& d : ds) d /= z;
    return Marginal{std::move(xs), std::move(ds)};
}

namespace detail {

/// Shared per-marginal machinery: log-density spline plus a x4-refined grid
/// with its trapezoid cumulative. All Table-1 operations run off this.
class MarginalInterp {
public:
    explicit MarginalInterp(const Marginal& m, int refine = 4)
        : lo_(m.xs.front()), hi_(m.xs.back()) {
        double dmax = *std::max_element(m.ds.begin(), m.ds.end());
        logfloor_ = std::log(dmax) - 320.0;
        std::vector<double> logd(m.ds.size());
        for (size_t i = 0; i < m.ds.size(); ++i)
            logd[i] = m.ds[i] > 0.0 ? std::max(std::log(m.ds[i]), logfloor_) : logfloor_;
        spline_.emplace(m.xs, std::move(logd));

        const int nref = static_cast<int>(m.xs.size() - 1) * refine + 1;
        gx_.resize(nref);
        gd_.resize(nref);
        int k = 0;
        for (size_t i = 0; i + 1 < m.xs.size(); ++i)
            for (int r = 0; r < refine; ++r)
                gx_[k++] = m.xs[i] + (m.xs[i + 1] - m.xs[i]) * (static_cast<double>(r) / refine);
        gx_[k] = m.xs.back();
        for (int i = 0; i < nref; ++i) gd_[i] = density(gx_[i]);
        cum_.assign(nref, 0.0);
        for (int i = 1; i < nref; ++i)
            cum_[i] = cum_[i - 1] + 0.5 * (gd_[i] + gd_[i - 1]) * (gx_[i] - gx_[i - 1]);
        total_ = cum_.back();
    }

    double density(double x) const {
        if (x < lo_ || x > hi_) return 0.0;
        return std::exp((*spline_)(x));
    }

    double cdf(double q) const {
        if (q <= lo_) return 0.0;
        if (q >= hi_) return 1.0;
        auto it = std::upper_bound(gx_.begin(), gx_.end(), q);
        int i = static_cast<int>(it - gx_.begin()) - 1;
        double c = cum_[i] + 0.5 * (gd_[i] + density(q)) * (q - gx_[i]);
        return std::clamp(c / total_, 0.0, 1.0);
    }

    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0))
            throw ValidationError("quantile: probability must be inside (0, 1)");
        double target = p * total_;
        auto it = std::lower_bound(cum_.begin(), cum_.end(), target);
        if (it == cum_.begin()) return gx_.front();
        if (it == cum_.end()) return gx_.back();
        int i = static_cast<int>(it - cum_.begin());
        // within cell [i-1, i]: trapezoid mass is quadratic in x; solve it
        double x0 = gx_[i - 1], x1 = gx_[i], d0 = gd_[i - 1], d1 = gd_[i];
        double need = target - cum_[i - 1];
        double h = x1 - x0;
        double slope = (d1 - d0) / h;
        if (std::abs(slope) < 1e-300) {
            if (d0 <= 0.0) return x1;
            return x0 + need / d0;
        }
        // solve d0 t + slope t^2/2 = need
        double disc = d0 * d0 + 2.0 * slope * need;
        double t = disc > 0.0 ? (-d0 + std::sqrt(disc)) / slope : need / std::max(d0, 1e-300);
        return x0 + std::clamp(t, 0.0, h);
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& grid_x() const { return gx_; }
    const std::vector<double>& grid_d() const { return gd_; }
    double total() const { return total_; }

private:
    double lo_, hi_, logfloor_, total_ = 0.0;
    std::optional<CubicSpline> spline_;
    std::vector<double> gx_, gd_, cum_;
};

}  // namespace detail

/// Density at evaluation points; zero outside the tabulated support.
inline std::vector<double> density_at(const Marginal& m, const std::vector<double>& x) {
    detail::MarginalInterp it(m);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = it.density(x[i]);
    return out;
}

inline std::vector<double> cdf_at(const Marginal& m, const std::vector<double>& q) {
    detail::MarginalInterp it(m);
    std::vector<double> out(q.size());
    for (size_t i = 0; i < q.size(); ++i) out[i] = it.cdf(q[i]);
    return out;
}

inline std::vector<double> quantile_at(const Marginal& m, const std::vector<double>& p) {
    detail::MarginalInterp it(m);
    std::vector<double> out(p.size());
    for (size_t i = 0; i < p.size(); ++i) out[i] = it.quantile(p[i]);
    return out;
}

/// n random deviates by inverse-CDF sampling; deterministic under the seed.
inline std::vector<double> sample(const Marginal& m, int n, std::uint64_t seed) {
    if (n < 0) throw ValidationError("sample: negative count");
    detail::MarginalInterp it(m);
    Rng rng(seed);
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = it.quantile(rng.uniform());
    return out;
}

/// Highest posterior density interval of mass p (unimodal marginals).
/// A disjoint above-threshold region raises an error listing the segments.
inline std::pair<double, double> hpd_interval(const Marginal& m, double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("hpd_interval: p must be inside (0, 1)");
    detail::MarginalInterp it(m);
    const auto& gx = it.grid_x();
    const auto& gd = it.grid_d();
    double dmax = *std::max_element(gd.begin(), gd.end());

    auto region = [&](double t) {
        // contiguous runs of cells where density exceeds t
        std::vector<std::pair<double, double>> segs;
        bool in = false;
        double start = 0.0;
        for (size_t i = 0; i < gx.size(); ++i) {
            bool above = gd[i] >= t;
            if (above && !in) {
                double x = gx[i];
                if (i > 0 && gd[i] != gd[i - 1]) {
                    double f = (t - gd[i - 1]) / (gd[i] - gd[i - 1]);
                    x = gx[i - 1] + f * (gx[i] - gx[i - 1]);
                }
                start = x;
                in = true;
            } else if (!above && in) {
                double x = gx[i];
                if (gd[i] != gd[i - 1]) {
                    double f = (t - gd[i - 1]) / (gd[i] - gd[i - 1]);
                    x = gx[i - 1] + f * (gx[i] - gx[i - 1]);
                }
                segs.emplace_back(start, x);
                in = false;
            }
        }
        if (in) segs.emplace_back(start, gx.back());
        return segs;
    };

    double lo_t = 0.0, hi_t = dmax;
    std::pair<double, double> best{it.lo(), it.hi()};
    for (int iter = 0; iter < 100; ++iter) {
        double t = 0.5 * (lo_t + hi_t);
        auto segs = region(t);
        if (segs.size() > 1) {
            // merge hairline gaps caused by grid noise; otherwise report
            std::string msg = "hpd_interval: multimodal marginal, segments:";
            double gapmass = 0.0;
            for (size_t s = 0; s + 1 < segs.size(); ++s)
                gapmass += it.cdf(segs[s + 1].first) - it.cdf(segs[s].second);
            if (gapmass > 1e-6) {
                char buf[64];
                for (auto& sg : segs) {
                    std::snprintf(buf, sizeof buf, " [%g, %g]", sg.first, sg.second);
                    msg += buf;
                }
                throw NumericalError(msg);
            }
            segs = {{segs.front().first, segs.back().second}};
        }
        if (segs.empty()) {
            hi_t = t;
            continue;
        }
        double mass = it.cdf(segs[0].second) - it.cdf(segs[0].first);
        if (mass >= p) {
            best = segs[0];
            lo_t = t;
        } else {
            hi_t = t;
        }
        if (hi_t - lo_t < 1e-12 * dmax) break;
    }
    return best;
}

/// Expectation of fun under the marginal, trapezoid on the refined grid.
/// Self-normalizing, so expect(m, 1) == 1 holds exactly up to roundoff.
inline std::vector<double> expect(const Marginal& m,
                                  const std::function<std::vector<double>(double)>& fun) {
    detail::MarginalInterp it(m);
    const auto& gx = it.grid_x();
    const auto& gd = it.grid_d();
    std::vector<double> f0 = fun(gx[0]);
    std::vector<double> acc(f0.size(), 0.0);
    std::vector<double> prev = f0;
    for (size_t i = 1; i < gx.size(); ++i) {
        std::vector<double> fi = fun(gx[i]);
        if (fi.size() != acc.size()) throw ValidationError("expect: fun output size changed");
        double h = gx[i] - gx[i - 1];
        for (size_t k = 0; k < acc.size(); ++k)
            acc[k] += 0.5 * (prev[k] * gd[i - 1] + fi[k] * gd[i]) * h;
        prev = std::move(fi);
    }
    for (auto& a : acc) {
        if (!std::isfinite(a)) throw NumericalError("expect: non-finite integrand");
        a /= it.total();
    }
    return acc;
}

inline double expect_scalar(const Marginal& m, const std::function<double(double)>& fun) {
    return expect(m, [&](double x) { return std::vector<double>{fun(x)}; })[0];
}

/// Mode of the interpolated density; ties break to the smallest abscissa.
inline double mode_of(const Marginal& m) {
    detail::MarginalInterp it(m);
    size_t arg = 0;
    for (size_t i = 1; i < m.ds.size(); ++i)
        if (m.ds[i] > m.ds[arg]) arg = i;
    size_t lo = arg > 0 ? arg - 1 : arg;
    size_t hi = arg + 1 < m.xs.size() ? arg + 1 : arg;
    double refined = golden_section([&](double x) { return -it.density(x); }, m.xs[lo], m.xs[hi],
                                    1e-12 * (m.xs.back() - m.xs.front()));
    // prefer the grid argmax on ties (flat densities)
    if (it.density(refined) <= it.density(m.xs[arg]) * (1.0 + 1e-12)) return m.xs[arg];
    return refined;
}

/// Change of variables through a strictly monotone map; the Jacobian comes
/// from finite differences of the mapped grid.
inline Marginal transform(const Marginal& m, const std::function<double(double)>& fun) {
    const size_t n = m.xs.size();
    std::vector<double> ys(n);
    for (size_t i = 0; i < n; ++i) {
        ys[i] = fun(m.xs[i]);
        if (!std::isfinite(ys[i])) throw ValidationError("transform: fun not finite on support");
    }
    bool increasing = ys[1] > ys[0];
    for (size_t i = 1; i < n; ++i) {
        bool up = ys[i] > ys[i - 1];
        if (up != increasing || ys[i] == ys[i - 1])
            throw ValidationError("transform: fun must be strictly monotone on the support");
    }
    std::vector<double> dens(n);
    for (size_t i = 0; i < n; ++i) {
        size_t a = i > 0 ? i - 1 : i;
        size_t b = i + 1 < n ? i + 1 : i;
        double dxdy = (m.xs[b] - m.xs[a]) / (ys[b] - ys[a]);
        dens[i] = m.ds[i] * std::abs(dxdy);
    }
    if (!increasing) {
        std::reverse(ys.begin(), ys.end());
        std::reverse(dens.begin(), dens.end());
    }
    return make_marginal(std::move(ys), std::move(dens));
}

struct MarginalSummary {
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0, q25 = 0.0, q5 = 0.0, q75 = 0.0, q975 = 0.0;
    double mode = 0.0;
};

inline MarginalSummary summarize(const Marginal& m) {
    MarginalSummary s;
    auto mm = expect(m, [](double x) { return std::vector<double>{x, x * x}; });
    s.mean = mm[0];
    s.sd = std::sqrt(std::max(0.0, mm[1] - mm[0] * mm[0]));
    auto q = quantile_at(m, {0.025, 0.25, 0.5, 0.75, 0.975});
    s.q025 = q[0];
    s.q25 = q[1];
    s.q5 = q[2];
    s.q75 = q[3];
    s.q975 = q[4];
    s.mode = mode_of(m);
    return s;
}

/// Log-spline resample onto a denser uniform grid over the same support.
inline Marginal smooth(const Marginal& m, int out_points) {
    if (out_points < 9) throw ValidationError("smooth: need at least 9 output points");
    detail::MarginalInterp it(m);
    std::vector<double> xs(out_points), ds(out_points);
    double lo = m.xs.front(), hi = m.xs.back();
    for (int i = 0; i < out_points; ++i) {
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / (out_points - 1);
        ds[i] = it.density(xs[i]);
    }
    return make_marginal(std::move(xs), std::move(ds));
}

/// Build a Marginal from scattered (x, log-density) evaluations: spline in
/// log space, linear tail extension down to `tail_logdrop` below the peak,
/// then exponentiate and normalize on a uniform output grid.
inline Marginal marginal_from_log_points(std::vector<double> xs, std::vector<double> logd,
                                         int out_points = 201, double tail_logdrop = 10.0,
                                         bool extend_tails = true) {
    if (xs.size() != logd.size() || xs.size() < 2)
        throw ValidationError("marginal_from_log_points: need >= 2 evaluations");
    // sort by x, drop near-duplicates
    std::vector<size_t> idx(xs.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> sx, sl;
    for (size_t k : idx) {
        if (!sx.empty() && xs[k] - sx.back() < 1e-9 * (std::abs(xs[k]) + 1.0)) continue;
        sx.push_back(xs[k]);
        sl.push_back(logd[k]);
    }
    if (sx.size() < 2) throw ValidationError("marginal_from_log_points: evaluations collapse");
    double peak = *std::max_element(sl.begin(), sl.end());
    for (auto& v : sl) v -= peak;

    CubicSpline sp(sx, sl);
    double lo = sx.front(), hi = sx.back();
    double span = hi - lo;
    if (extend_tails) {
        // extend with the end slopes until the log density has dropped enough
        double dl = sp.deriv_left(), dr = sp.deriv_right();
        if (dl > 1e-12 && sl.front() > -tail_logdrop)
            lo -= std::min((tail_logdrop + sl.front()) / dl, 3.0 * span);
        if (dr < -1e-12 && sl.back() > -tail_logdrop)
            hi += std::min((tail_logdrop + sl.back()) / (-dr), 3.0 * span);
    }

    std::vector<double> gx(out_points), gd(out_points);
    for (int i = 0; i < out_points; ++i) {
        double x = lo + (hi - lo) * static_cast<double>(i) / (out_points - 1);
        gx[i] = x;
        double lv = sp(x);  // spline inside, linear extension outside
        gd[i] = std::exp(std::min(lv, 2.0));  // guard against wild extrapolation
    }
    return make_marginal(std::move(gx), std::move(gd));
}

/// Tabulate a Gaussian density over mean +/- 5 sd.
inline Marginal gaussian_marginal(double mean, double variance, int grid_points = 75) {
    if (!(variance > 0.0)) throw NumericalError("gaussian_marginal: variance must be positive");
    double sd = std::sqrt(variance);
    std::vector<double> xs(grid_points), ds(grid_points);
    for (int i = 0; i < grid_points; ++i) {
        double z = -5.0 + 10.0 * static_cast<double>(i) / (grid_points - 1);
        xs[i] = mean + z * sd;
        ds[i] = std::exp(-0.5 * z * z) / (sd * 2.50662827463100050241576528481);
    }
    return make_marginal(std::move(xs), std::move(ds));
}

}  // namespace inla

#endif
