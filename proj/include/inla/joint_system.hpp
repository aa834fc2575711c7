#ifndef INLA_JOINT_SYSTEM_HPP
#define INLA_JOINT_SYSTEM_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <tuple>
#include <vector>

#include "inla/cholesky.hpp"
#include "inla/model.hpp"
#include "inla/sparse.hpp"

namespace inla {

/// Block view of the augmented joint precision
///   [ tau_e I + diag(c)   -tau_e B ]
///   [ -tau_e B^T           Q_rest + tau_e B^T B ]
/// Working through the Schur complement Q_rest + B^T D B with
/// D_i = tau_e c_i / (tau_e + c_i) keeps every quantity free of the
/// big-minus-big cancellations that break a direct factorization when the
/// predictor-noise precision meets vague priors or missing responses.
struct JointStructure {
    int n_obs = 0;
    int n_rest = 0;
    double tau_e = 0.0;
    std::vector<std::vector<std::pair<int, double>>> b_rows;  // rest -> eta map
    SparseSymmetric q_rest;
    double logdet_q_rest = 0.0;

    int n_total() const { return n_obs + n_rest; }

    /// log |Q|: the eta block contributes exactly n_obs * log(tau_e).
    double prior_log_det() const {
        return n_obs * std::log(tau_e) + logdet_q_rest;
    }

    /// x^T Q x evaluated as tau_e ||eta - B v||^2 + v^T Q_rest v.
    double prior_quadratic(const std::vector<double>& x) const {
        std::vector<double> v(x.begin() + n_obs, x.end());
        double s = 0.0;
        for (int i = 0; i < n_obs; ++i) {
            double r = x[i];
            for (auto [col, w] : b_rows[i]) r -= w * v[col];
            s += r * r;
        }
        return tau_e * s + q_rest.quadratic_form(v);
    }

    /// y = Q x in the same structured form.
    std::vector<double> prior_apply(const std::vector<double>& x) const {
        std::vector<double> v(x.begin() + n_obs, x.end());
        std::vector<double> y(n_total(), 0.0);
        std::vector<double> qv = q_rest.multiply(v);
        for (int j = 0; j < n_rest; ++j) y[n_obs + j] = qv[j];
        for (int i = 0; i < n_obs; ++i) {
            double r = x[i];
            for (auto [col, w] : b_rows[i]) r -= w * v[col];
            double tr = tau_e * r;
            y[i] = tr;
            for (auto [col, w] : b_rows[i]) y[n_obs + col] -= w * tr;
        }
        return y;
    }
};

inline JointStructure build_joint_structure(const LatentGaussianModel& m,
                                            const std::vector<double>& theta) {
    JointStructure js;
    js.n_obs = m.n_obs();
    js.n_rest = m.n_latent() - m.n_obs();
    js.tau_e = std::exp(m.predictor_noise_log_precision);
    js.b_rows = m.predictor_map();

    std::vector<std::tuple<int, int, double>> trip;
    for (size_t k = 0; k < m.components.size(); ++k) {
        const auto& c = m.components[k];
        int base = m.component_offset(static_cast<int>(k)) - js.n_obs;
        double tau = m.component_precision_(c, theta);
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
                for (int j = 0; j < c.size; ++j)
                    for (int p = q.colptr()[j]; p < q.colptr()[j + 1]; ++p)
                        trip.emplace_back(base + q.rows()[p], base + j, q.values()[p]);
                for (int j = 0; j < c.size; ++j) trip.emplace_back(base + j, base + j, m.rw2_jitter);
                break;
            }
        }
    }
    js.q_rest = SparseSymmetric::from_triplets(js.n_rest, std::move(trip));
    js.logdet_q_rest = cholesky(js.q_rest).log_det();
    return js;
}

/// Factorization of Q + diag(c) for a fixed curvature vector c (nonzero on
/// eta rows only). Immutable once built; safe to share across threads.
class JointFactor {
public:
    JointFactor(std::shared_ptr<const JointStructure> js, const std::vector<double>& curvature)
        : js_(std::move(js)) {
        const auto& s = *js_;
        if (static_cast<int>(curvature.size()) != s.n_total())
            throw ValidationError("JointFactor: curvature dimension mismatch");
        for (int j = s.n_obs; j < s.n_total(); ++j)
            if (curvature[j] != 0.0)
                throw ValidationError("JointFactor: curvature must live on the eta block");

        c_.assign(curvature.begin(), curvature.begin() + s.n_obs);
        d_.resize(s.n_obs);
        double logdet_eta = 0.0;
        for (int i = 0; i < s.n_obs; ++i) {
            if (c_[i] < 0.0) throw NumericalError("JointFactor: negative curvature");
            d_[i] = s.tau_e * c_[i] / (s.tau_e + c_[i]);
            logdet_eta += std::log(s.tau_e + c_[i]);
        }

        std::vector<std::tuple<int, int, double>> trip;
        const auto& cp = s.q_rest.colptr();
        for (int j = 0; j < s.n_rest; ++j)
            for (int p = cp[j]; p < cp[j + 1]; ++p)
                trip.emplace_back(s.q_rest.rows()[p], j, s.q_rest.values()[p]);
        for (int i = 0; i < s.n_obs; ++i) {
            if (d_[i] == 0.0) continue;
            for (auto [a, wa] : s.b_rows[i])
                for (auto [b, wb] : s.b_rows[i]) {
                    if (a < b) continue;
                    trip.emplace_back(a, b, d_[i] * wa * wb);
                }
        }
        rest_matrix_ = SparseSymmetric::from_triplets(s.n_rest, std::move(trip));
        rest_factor_ = cholesky(rest_matrix_);
        log_det_ = logdet_eta + rest_factor_.log_det();
    }

    double log_det() const { return log_det_; }

    /// Solve (Q + diag(c)) x = g by block elimination.
    std::vector<double> solve(const std::vector<double>& g) const {
        const auto& s = *js_;
        if (static_cast<int>(g.size()) != s.n_total())
            throw ValidationError("JointFactor::solve: dimension mismatch");
        // rhs for the rest block: g_v + B^T (tau_e/(tau_e+c)) g_eta
        std::vector<double> rhs(g.begin() + s.n_obs, g.end());
        for (int i = 0; i < s.n_obs; ++i) {
            double scaled = g[i] * (s.tau_e / (s.tau_e + c_[i]));
            for (auto [col, w] : s.b_rows[i]) rhs[col] += w * scaled;
        }
        std::vector<double> v = rest_factor_.solve(rhs);
        std::vector<double> x(s.n_total());
        for (int j = 0; j < s.n_rest; ++j) x[s.n_obs + j] = v[j];
        for (int i = 0; i < s.n_obs; ++i) {
            double bv = 0.0;
            for (auto [col, w] : s.b_rows[i]) bv += w * v[col];
            x[i] = (g[i] + s.tau_e * bv) / (s.tau_e + c_[i]);
        }
        return x;
    }

    /// diag((Q + diag(c))^{-1}): Takahashi on the rest factor plus one
    /// forward solve per eta row.
    std::vector<double> marginal_variances() const {
        const auto& s = *js_;
        std::vector<double> out(s.n_total());
        std::vector<double> rest_var = rest_factor_.marginal_variances();
        for (int j = 0; j < s.n_rest; ++j) out[s.n_obs + j] = rest_var[j];
        std::vector<double> b(s.n_rest);
        for (int i = 0; i < s.n_obs; ++i) {
            double quad = 0.0;
            if (!s.b_rows[i].empty()) {
                std::fill(b.begin(), b.end(), 0.0);
                for (auto [col, w] : s.b_rows[i]) b[col] = w;
                quad = rest_factor_.inverse_quadratic(b);
            }
            double shrink = s.tau_e / (s.tau_e + c_[i]);
            out[i] = 1.0 / (s.tau_e + c_[i]) + shrink * shrink * quad;
        }
        return out;
    }

    const JointStructure& structure() const { return *js_; }

private:
    std::shared_ptr<const JointStructure> js_;
    std::vector<double> c_, d_;
    SparseSymmetric rest_matrix_;
    CholeskyFactor rest_factor_;
    double log_det_ = 0.0;
};

/// log N(x; 0, Q(theta)^{-1}) through the block structure.
inline double log_prior_latent(const LatentGaussianModel& m, const std::vector<double>& x,
                               const std::vector<double>& theta) {
    JointStructure js = build_joint_structure(m, theta);
    if (static_cast<int>(x.size()) != js.n_total())
        throw ValidationError("log_prior_latent: dimension mismatch");
    return -0.5 * js.prior_quadratic(x) + 0.5 * js.prior_log_det() -
           0.5 * js.n_total() * std::log(2.0 * M_PI);
}

}  // namespace inla

#endif
