#ifndef INLA_CHOLESKY_HPP
#define INLA_CHOLESKY_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include "inla/errors.hpp"
#include "inla/sparse.hpp"

namespace inla {

/// Sparse Cholesky factor P Q P^T = L L^T with a fill-reducing permutation.
/// The factor is an immutable value: solves, log-determinant and marginal
/// variances derive from it without touching the input matrix again.
///
/// Convention: factor index k corresponds to original index perm[k], i.e.
/// (P x)_k = x[perm[k]].
class CholeskyFactor {
public:
    int dim() const noexcept { return n_; }
    const std::vector<int>& permutation() const noexcept { return perm_; }

    // CSC storage of L (columns sorted, diagonal first).
    const std::vector<int>& colptr() const noexcept { return Lp_; }
    const std::vector<int>& rows() const noexcept { return Li_; }
    const std::vector<double>& values() const noexcept { return Lx_; }

    /// log|Q| = 2 * sum(log L_ii).
    double log_det() const noexcept {
        double s = 0.0;
        for (int j = 0; j < n_; ++j) s += std::log(Lx_[Lp_[j]]);
        return 2.0 * s;
    }

    /// b^T Q^{-1} b = ||L^{-1} P b||^2, one forward solve.
    double inverse_quadratic(const std::vector<double>& b) const {
        if (static_cast<int>(b.size()) != n_)
            throw ValidationError("inverse_quadratic: dimension mismatch");
        std::vector<double> y(n_);
        for (int k = 0; k < n_; ++k) y[k] = b[perm_[k]];
        forward_(y);
        double s = 0.0;
        for (double v : y) s += v * v;
        return s;
    }

    /// Solve Q x = b.
    std::vector<double> solve(const std::vector<double>& b) const {
        if (static_cast<int>(b.size()) != n_)
            throw ValidationError("CholeskyFactor::solve: dimension mismatch");
        std::vector<double> y(n_);
        for (int k = 0; k < n_; ++k) y[k] = b[perm_[k]];
        forward_(y);
        backward_(y);
        std::vector<double> x(n_);
        for (int k = 0; k < n_; ++k) x[perm_[k]] = y[k];
        return x;
    }

    /// diag(Q^{-1}) by Takahashi partial inversion over the factor pattern,
    /// with a dense-inverse fallback for n <= 2000 if a pattern lookup ever
    /// fails (it cannot for a factor produced here, where fill is symbolic).
    std::vector<double> marginal_variances() const {
        std::vector<double> sigma_diag(n_, 0.0);
        std::vector<double> sig(Lx_.size(), 0.0);  // Sigma on pattern of L
        bool ok = true;
        // Process columns right to left; within a column, rows bottom-up.
        for (int i = n_ - 1; i >= 0 && ok; --i) {
            double lii = Lx_[Lp_[i]];
            for (int q = Lp_[i + 1] - 1; q >= Lp_[i]; --q) {
                int j = Li_[q];  // j >= i
                double s = (i == j) ? 1.0 / (lii * lii) : 0.0;
                // s -= (1/L_ii) * sum_{k>i, L_ki != 0} L_ki * Sigma_kj
                double acc = 0.0;
                for (int p = Lp_[i] + 1; p < Lp_[i + 1]; ++p) {
                    int k = Li_[p];
                    double skj;
                    if (!sigma_lookup_(k, j, sig, skj)) { ok = false; break; }
                    acc += Lx_[p] * skj;
                }
                if (!ok) break;
                s -= acc / lii;
                if (i == j)
                    sigma_diag[i] = s;
                else
                    sig[q] = s;
            }
            if (ok) {
                // store diagonal into the pattern slot as well
                sig[Lp_[i]] = sigma_diag[i];
            }
        }
        std::vector<double> out(n_);
        if (ok) {
            for (int k = 0; k < n_; ++k) out[perm_[k]] = sigma_diag[k];
            return out;
        }
        if (n_ > 2000)
            throw NumericalError("marginal_variances: pattern closure violated and n too large for dense fallback");
        return dense_inverse_diagonal_();
    }

private:
    friend CholeskyFactor cholesky(const SparseSymmetric&, bool);

    void forward_(std::vector<double>& y) const {
        for (int j = 0; j < n_; ++j) {
            y[j] /= Lx_[Lp_[j]];
            double yj = y[j];
            for (int p = Lp_[j] + 1; p < Lp_[j + 1]; ++p) y[Li_[p]] -= Lx_[p] * yj;
        }
    }
    void backward_(std::vector<double>& y) const {
        for (int j = n_ - 1; j >= 0; --j) {
            double s = y[j];
            for (int p = Lp_[j] + 1; p < Lp_[j + 1]; ++p) s -= Lx_[p] * y[Li_[p]];
            y[j] = s / Lx_[Lp_[j]];
        }
    }

    // Sigma_kj with k,j >= min: stored at (max, min) in L's pattern.
    bool sigma_lookup_(int k, int j, const std::vector<double>& sig, double& out) const {
        int c = std::min(k, j), r = std::max(k, j);
        int lo = Lp_[c], hi = Lp_[c + 1];
        auto it = std::lower_bound(Li_.begin() + lo, Li_.begin() + hi, r);
        if (it == Li_.begin() + hi || *it != r) return false;
        out = sig[static_cast<size_t>(it - Li_.begin())];
        return true;
    }

    std::vector<double> dense_inverse_diagonal_() const {
        // Sigma = L^{-T} L^{-1}; column k of L^{-1} via forward solve on e_k.
        std::vector<double> diag_perm(n_, 0.0);
        std::vector<double> e(n_);
        for (int k = 0; k < n_; ++k) {
            std::fill(e.begin(), e.end(), 0.0);
            e[k] = 1.0;
            forward_(e);
            backward_(e);
            diag_perm[k] = e[k];
        }
        std::vector<double> out(n_);
        for (int k = 0; k < n_; ++k) out[perm_[k]] = diag_perm[k];
        return out;
    }

    int n_ = 0;
    std::vector<int> perm_;
    std::vector<int> Lp_, Li_;
    std::vector<double> Lx_;
};

namespace detail {

/// AMD fill-reducing ordering of the symmetric pattern, with an optional
/// set of columns pinned to the front of the elimination sequence.
inline std::vector<int> amd_ordering(const SparseSymmetric& q) {
    const int n = q.dim();
    std::vector<char> first(n, 0);
    std::vector<int> order;
    order.reserve(n);
    for (int j : q.eliminate_first()) {
        if (j < 0 || j >= n) throw ValidationError("eliminate_first index out of range");
        if (!first[j]) {
            first[j] = 1;
            order.push_back(j);
        }
    }
    // AMD over the remaining subgraph
    std::vector<int> rest, pos(n, -1);
    for (int j = 0; j < n; ++j)
        if (!first[j]) {
            pos[j] = static_cast<int>(rest.size());
            rest.push_back(j);
        }
    const int m = static_cast<int>(rest.size());
    if (m == 0) return order;
    using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(q.nnz_lower() * 2);
    for (int j = 0; j < n; ++j) {
        if (first[j]) continue;
        for (int p = q.colptr()[j]; p < q.colptr()[j + 1]; ++p) {
            int i = q.rows()[p];
            if (first[i]) continue;
            trip.emplace_back(pos[i], pos[j], 1.0);
            if (i != j) trip.emplace_back(pos[j], pos[i], 1.0);
        }
    }
    SpMat a(m, m);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
    Eigen::AMDOrdering<int>()(a, perm);
    // With Eigen's convention, indices()[k] is the original index eliminated
    // at step k (verified by the star-graph fill test).
    for (int k = 0; k < m; ++k) order.push_back(rest[perm.indices()[k]]);
    return order;
}

}  // namespace detail

/// Factorize a symmetric positive definite matrix. With `permute` true an AMD
/// ordering is used unless the matrix is already banded (bandwidth <= 5),
/// where natural order is kept.
inline CholeskyFactor cholesky(const SparseSymmetric& q, bool permute = true) {
    const int n = q.dim();
    CholeskyFactor f;
    f.n_ = n;
    if (permute && (!q.eliminate_first().empty() || q.bandwidth() > 5))
        f.perm_ = detail::amd_ordering(q);
    else {
        f.perm_.resize(n);
        for (int i = 0; i < n; ++i) f.perm_[i] = i;
    }
    std::vector<int> pinv(n);
    for (int k = 0; k < n; ++k) pinv[f.perm_[k]] = k;

    // Permuted matrix in upper-triangle CSC form: column k holds entries
    // A'(j,k) with j <= k, which is what the up-looking factorization reads.
    std::vector<int> up_count(n, 0);
    const auto& cp = q.colptr();
    const auto& ri = q.rows();
    const auto& vx = q.values();
    for (int j = 0; j < n; ++j) {
        for (int p = cp[j]; p < cp[j + 1]; ++p) {
            int a = pinv[ri[p]], b = pinv[j];
            up_count[std::max(a, b)]++;
        }
    }
    std::vector<int> Up(n + 1, 0);
    for (int k = 0; k < n; ++k) Up[k + 1] = Up[k] + up_count[k];
    std::vector<int> Ui(Up[n]);
    std::vector<double> Ux(Up[n]);
    {
        std::vector<int> next(Up.begin(), Up.end() - 1);
        for (int j = 0; j < n; ++j) {
            for (int p = cp[j]; p < cp[j + 1]; ++p) {
                int a = pinv[ri[p]], b = pinv[j];
                int col = std::max(a, b), row = std::min(a, b);
                Ui[next[col]] = row;
                Ux[next[col]] = vx[p];
                ++next[col];
            }
        }
    }

    // Elimination tree (Liu): parent[] with path compression via ancestor[].
    std::vector<int> parent(n, -1), ancestor(n, -1);
    for (int k = 0; k < n; ++k) {
        for (int p = Up[k]; p < Up[k + 1]; ++p) {
            int i = Ui[p];
            while (i != -1 && i < k) {
                int nexti = ancestor[i];
                ancestor[i] = k;
                if (nexti == -1) parent[i] = k;
                i = nexti;
            }
        }
    }

    // ereach: nonzero pattern of row k of L (indices < k), topological order.
    std::vector<int> stack(n), flag(n, -1);
    auto ereach = [&](int k) -> int {
        int top = n;
        flag[k] = k;
        for (int p = Up[k]; p < Up[k + 1]; ++p) {
            int i = Ui[p];
            if (i >= k) continue;
            int len = 0;
            while (flag[i] != k) {
                stack[len++] = i;
                flag[i] = k;
                i = parent[i];
            }
            while (len > 0) stack[--top] = stack[--len];
        }
        return top;  // pattern is stack[top..n-1]
    };

    // Pass 1: column counts of L.
    std::vector<int> colcount(n, 1);  // diagonal
    for (int k = 0; k < n; ++k) {
        int top = ereach(k);
        for (int s = top; s < n; ++s) colcount[stack[s]]++;
    }
    f.Lp_.assign(n + 1, 0);
    for (int k = 0; k < n; ++k) f.Lp_[k + 1] = f.Lp_[k] + colcount[k];
    f.Li_.assign(f.Lp_[n], 0);
    f.Lx_.assign(f.Lp_[n], 0.0);

    // scale-invariant pivot guard: compare against the column's own diagonal
    // (a global max-diagonal floor mis-fires when the matrix mixes the huge
    // predictor-noise precision with order-one prior precisions)
    std::vector<double> diag_scale(n, 0.0);
    for (int k = 0; k < n; ++k)
        for (int p = Up[k]; p < Up[k + 1]; ++p)
            if (Ui[p] == k) diag_scale[k] = std::abs(Ux[p]);

    // Pass 2: numeric up-looking factorization.
    std::fill(flag.begin(), flag.end(), -1);
    std::vector<int> nextfree(n);
    std::vector<double> x(n, 0.0);
    for (int k = 0; k < n; ++k) {
        nextfree[k] = f.Lp_[k] + 1;  // first entry below the diagonal slot
        f.Li_[f.Lp_[k]] = k;
        int top = ereach(k);
        double d = 0.0;
        for (int p = Up[k]; p < Up[k + 1]; ++p) {
            if (Ui[p] < k)
                x[Ui[p]] = Ux[p];
            else
                d = Ux[p];  // diagonal
        }
        for (int s = top; s < n; ++s) {
            int i = stack[s];
            double lki = x[i] / f.Lx_[f.Lp_[i]];
            x[i] = 0.0;
            for (int p = f.Lp_[i] + 1; p < nextfree[i]; ++p) x[f.Li_[p]] -= f.Lx_[p] * lki;
            d -= lki * lki;
            f.Li_[nextfree[i]] = k;
            f.Lx_[nextfree[i]] = lki;
            ++nextfree[i];
        }
        if (!(d > 1e-12 * diag_scale[k]))
            throw NotPositiveDefiniteError(
                "cholesky: matrix not positive definite at index " +
                    std::to_string(f.perm_[k]) + " (pivot " + std::to_string(d) + ")",
                f.perm_[k]);
        f.Lx_[f.Lp_[k]] = std::sqrt(d);
    }
    return f;
}

inline double log_det(const CholeskyFactor& f) { return f.log_det(); }

inline std::vector<double> solve(const CholeskyFactor& f, const std::vector<double>& b) {
    return f.solve(b);
}

inline std::vector<double> marginal_variances(const CholeskyFactor& f) {
    return f.marginal_variances();
}

}  // namespace inla

#endif
