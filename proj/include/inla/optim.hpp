#ifndef INLA_OPTIM_HPP
#define INLA_OPTIM_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "inla/errors.hpp"

namespace inla {

struct NelderMeadResult {
    std::vector<double> x;
    double fmin = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimization with one restart around the incumbent.
/// Convergence on the simplex function-value spread.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, double initial_step = 0.5,
                                    double ftol = 1e-5, int max_evals = 20000,
                                    double xtol = 1e-6) {
    const int d = static_cast<int>(x0.size());
    NelderMeadResult res;
    if (d == 0) {  // nothing to optimize
        res.x = x0;
        res.fmin = f(x0);
        res.evaluations = 1;
        res.converged = true;
        return res;
    }
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return f(x);
    };

    auto run = [&](std::vector<double> start, double step) {
        std::vector<std::vector<double>> pts(d + 1, start);
        std::vector<double> fv(d + 1);
        for (int j = 0; j < d; ++j) pts[j + 1][j] += step;
        for (int i = 0; i <= d; ++i) fv[i] = eval(pts[i]);

        const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
        while (evals < max_evals) {
            std::vector<int> order(d + 1);
            for (int i = 0; i <= d; ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
            std::vector<std::vector<double>> spts(d + 1);
            std::vector<double> sfv(d + 1);
            for (int i = 0; i <= d; ++i) {
                spts[i] = pts[order[i]];
                sfv[i] = fv[order[i]];
            }
            pts.swap(spts);
            fv.swap(sfv);

            double diam = 0.0;
            for (int i = 1; i <= d; ++i)
                for (int j = 0; j < d; ++j) diam = std::max(diam, std::abs(pts[i][j] - pts[0][j]));
            if (std::abs(fv[d] - fv[0]) < ftol && diam < xtol)
                return std::make_pair(pts[0], fv[0]);

            std::vector<double> centroid(d, 0.0);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) centroid[j] += pts[i][j] / d;

            auto combine = [&](double t) {
                std::vector<double> x(d);
                for (int j = 0; j < d; ++j) x[j] = centroid[j] + t * (pts[d][j] - centroid[j]);
                return x;
            };
            auto xr = combine(-alpha);
            double fr = eval(xr);
            if (fr < fv[0]) {
                auto xe = combine(-gamma);
                double fe = eval(xe);
                if (fe < fr) {
                    pts[d] = xe;
                    fv[d] = fe;
                } else {
                    pts[d] = xr;
                    fv[d] = fr;
                }
            } else if (fr < fv[d - 1]) {
                pts[d] = xr;
                fv[d] = fr;
            } else {
                auto xc = combine(fr < fv[d] ? -rho : rho);
                double fc = eval(xc);
                if (fc < std::min(fr, fv[d])) {
                    pts[d] = xc;
                    fv[d] = fc;
                } else {
                    for (int i = 1; i <= d; ++i) {
                        for (int j = 0; j < d; ++j)
                            pts[i][j] = pts[0][j] + sigma * (pts[i][j] - pts[0][j]);
                        fv[i] = eval(pts[i]);
                    }
                }
            }
        }
        return std::make_pair(pts[0], fv[0]);
    };

    auto [x1, f1] = run(x0, initial_step);
    auto [x2, f2] = run(x1, initial_step * 0.25);  // restart with a tighter simplex
    res.x = f2 <= f1 ? x2 : x1;
    res.fmin = std::min(f1, f2);
    res.evaluations = evals;
    res.converged = evals < max_evals;
    return res;
}

/// Golden-section minimization on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b,
                             double xtol = 1e-10) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > xtol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace inla

#endif
