#ifndef INLA_SPLINE_HPP
#define INLA_SPLINE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "inla/errors.hpp"

namespace inla {

/// Interpolating cubic spline with not-a-knot boundary conditions (exact on
/// cubics, which the log-density recovery tests rely on). Degenerates to a
/// parabola for 3 nodes and a line for 2. Evaluation outside the node range
/// extrapolates linearly with the end slopes.
class CubicSpline {
public:
    CubicSpline(std::vector<double> xs, std::vector<double> ys)
        : xs_(std::move(xs)), ys_(std::move(ys)) {
        const int n = static_cast<int>(xs_.size());
        if (n < 2 || ys_.size() != xs_.size())
            throw ValidationError("CubicSpline: need >= 2 nodes and matching values");
        for (int i = 1; i < n; ++i)
            if (!(xs_[i] > xs_[i - 1]))
                throw ValidationError("CubicSpline: abscissae must be strictly ascending");
        m_.assign(n, 0.0);
        if (n == 2) {
            // linear; moments stay zero
        } else if (n == 3) {
            // single parabola through the three points: constant second derivative
            double h0 = xs_[1] - xs_[0], h1 = xs_[2] - xs_[1];
            double dd = 2.0 * ((ys_[2] - ys_[1]) / h1 - (ys_[1] - ys_[0]) / h0) / (h0 + h1);
            m_.assign(3, dd);
        } else {
            solve_moments_();
        }
    }

    double operator()(double x) const {
        const int n = static_cast<int>(xs_.size());
        if (x <= xs_.front()) return ys_.front() + deriv_left() * (x - xs_.front());
        if (x >= xs_.back()) return ys_.back() + deriv_right() * (x - xs_.back());
        int i = segment_(x);
        double h = xs_[i + 1] - xs_[i];
        double a = xs_[i + 1] - x, b = x - xs_[i];
        return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) +
               (ys_[i] / h - m_[i] * h / 6.0) * a + (ys_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
    }

    double deriv_left() const {
        double h = xs_[1] - xs_[0];
        return (ys_[1] - ys_[0]) / h - h * (2.0 * m_[0] + m_[1]) / 6.0;
    }
    double deriv_right() const {
        const int n = static_cast<int>(xs_.size());
        double h = xs_[n - 1] - xs_[n - 2];
        return (ys_[n - 1] - ys_[n - 2]) / h + h * (m_[n - 2] + 2.0 * m_[n - 1]) / 6.0;
    }

private:
    int segment_(double x) const {
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        int i = static_cast<int>(it - xs_.begin()) - 1;
        return std::clamp(i, 0, static_cast<int>(xs_.size()) - 2);
    }

    // Second-derivative (moment) system; banded with half-bandwidth 2 only in
    // the two not-a-knot rows, solved by band LU with partial pivoting.
    void solve_moments_() {
        const int n = static_cast<int>(xs_.size());
        const int kl = 2, ku = 2, stride = kl + ku + 1 + kl;  // extra kl for pivot growth
        std::vector<double> ab(static_cast<size_t>(n) * stride, 0.0);
        std::vector<double> rhs(n, 0.0);
        auto at = [&](int r, int c) -> double& {
            return ab[static_cast<size_t>(r) * stride + (c - r + kl)];
        };
        std::vector<double> h(n - 1);
        for (int i = 0; i + 1 < n; ++i) h[i] = xs_[i + 1] - xs_[i];

        // not-a-knot at both ends
        at(0, 0) = h[1];
        at(0, 1) = -(h[0] + h[1]);
        at(0, 2) = h[0];
        at(n - 1, n - 3) = h[n - 2];
        at(n - 1, n - 2) = -(h[n - 3] + h[n - 2]);
        at(n - 1, n - 1) = h[n - 3];
        for (int i = 1; i < n - 1; ++i) {
            at(i, i - 1) = h[i - 1] / 6.0;
            at(i, i) = (h[i - 1] + h[i]) / 3.0;
            at(i, i + 1) = h[i] / 6.0;
            rhs[i] = (ys_[i + 1] - ys_[i]) / h[i] - (ys_[i] - ys_[i - 1]) / h[i - 1];
        }

        // band LU with partial pivoting
        std::vector<int> colhi(n);
        for (int r = 0; r < n; ++r) colhi[r] = std::min(n - 1, r + ku);
        for (int k = 0; k < n; ++k) {
            int piv = k;
            double best = std::abs(at(k, k));
            for (int r = k + 1; r <= std::min(n - 1, k + kl); ++r) {
                if (std::abs(at(r, k)) > best) {
                    best = std::abs(at(r, k));
                    piv = r;
                }
            }
            if (best == 0.0) throw NumericalError("CubicSpline: singular moment system");
            int hi = std::min(n - 1, std::max(colhi[k], colhi[piv]));
            if (piv != k) {
                for (int c = k; c <= hi; ++c) std::swap(at(k, c), at(piv, c));
                std::swap(rhs[k], rhs[piv]);
            }
            colhi[k] = hi;
            for (int r = k + 1; r <= std::min(n - 1, k + kl); ++r) {
                double f = at(r, k) / at(k, k);
                if (f == 0.0) continue;
                for (int c = k; c <= hi; ++c) at(r, c) -= f * at(k, c);
                rhs[r] -= f * rhs[k];
                colhi[r] = std::max(colhi[r], hi);
            }
        }
        for (int r = n - 1; r >= 0; --r) {
            double s = rhs[r];
            for (int c = r + 1; c <= colhi[r]; ++c) s -= at(r, c) * m_[c];
            m_[r] = s / at(r, r);
        }
    }

    std::vector<double> xs_, ys_, m_;
};

}  // namespace inla

#endif
