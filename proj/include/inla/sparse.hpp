#ifndef INLA_SPARSE_HPP
#define INLA_SPARSE_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <tuple>
#include <vector>

#include "inla/errors.hpp"

namespace inla {

/// Sparse symmetric matrix storing only the lower triangle in compressed
/// column form. Columns keep their rows sorted ascending, so the diagonal
/// entry is always the first entry of its column. Every diagonal slot is
/// present even when its value is zero; off-diagonal zeros are dropped at
/// assembly time.
class SparseSymmetric {
public:
    SparseSymmetric() = default;

    /// Assemble from (row, col, value) triplets. Either triangle may be
    /// given; duplicates accumulate.
    static SparseSymmetric from_triplets(
        int n, std::vector<std::tuple<int, int, double>> triplets) {
        if (n < 1) throw ValidationError("SparseSymmetric: dimension must be >= 1");
        for (auto& [i, j, v] : triplets) {
            if (i < 0 || i >= n || j < 0 || j >= n)
                throw ValidationError("SparseSymmetric: index out of range");
            if (i < j) std::swap(i, j);  // mirror to lower triangle
        }
        // Sort column-major, accumulate duplicates.
        std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<0>(a) < std::get<0>(b);
        });
        SparseSymmetric m;
        m.n_ = n;
        m.colptr_.assign(static_cast<size_t>(n) + 1, 0);
        std::vector<int> rows;
        std::vector<double> vals;
        rows.reserve(triplets.size() + n);
        vals.reserve(triplets.size() + n);
        size_t t = 0;
        for (int j = 0; j < n; ++j) {
            m.colptr_[j] = static_cast<int>(rows.size());
            // Diagonal slot always present.
            double diag = 0.0;
            while (t < triplets.size() && std::get<1>(triplets[t]) == j &&
                   std::get<0>(triplets[t]) == j) {
                diag += std::get<2>(triplets[t]);
                ++t;
            }
            rows.push_back(j);
            vals.push_back(diag);
            while (t < triplets.size() && std::get<1>(triplets[t]) == j) {
                int i = std::get<0>(triplets[t]);
                double v = 0.0;
                while (t < triplets.size() && std::get<1>(triplets[t]) == j &&
                       std::get<0>(triplets[t]) == i) {
                    v += std::get<2>(triplets[t]);
                    ++t;
                }
                if (v != 0.0) {
                    rows.push_back(i);
                    vals.push_back(v);
                }
            }
        }
        m.colptr_[n] = static_cast<int>(rows.size());
        m.rows_ = std::move(rows);
        m.vals_ = std::move(vals);
        return m;
    }

    static SparseSymmetric identity(int n, double value = 1.0) {
        std::vector<std::tuple<int, int, double>> t;
        t.reserve(n);
        for (int i = 0; i < n; ++i) t.emplace_back(i, i, value);
        return from_triplets(n, std::move(t));
    }

    int dim() const noexcept { return n_; }
    int nnz_lower() const noexcept { return static_cast<int>(rows_.size()); }

    const std::vector<int>& colptr() const noexcept { return colptr_; }
    const std::vector<int>& rows() const noexcept { return rows_; }
    const std::vector<double>& values() const noexcept { return vals_; }

    /// Value at (i, j); symmetric lookup, 0 when the entry is not stored.
    double at(int i, int j) const {
        if (i < 0 || i >= n_ || j < 0 || j >= n_)
            throw ValidationError("SparseSymmetric::at: index out of range");
        if (i < j) std::swap(i, j);
        int lo = colptr_[j], hi = colptr_[j + 1];
        auto it = std::lower_bound(rows_.begin() + lo, rows_.begin() + hi, i);
        if (it != rows_.begin() + hi && *it == i)
            return vals_[static_cast<size_t>(it - rows_.begin())];
        return 0.0;
    }

    /// y = A x using the symmetric structure.
    std::vector<double> multiply(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != n_)
            throw ValidationError("SparseSymmetric::multiply: dimension mismatch");
        std::vector<double> y(n_, 0.0);
        for (int j = 0; j < n_; ++j) {
            for (int p = colptr_[j]; p < colptr_[j + 1]; ++p) {
                int i = rows_[p];
                double v = vals_[p];
                y[i] += v * x[j];
                if (i != j) y[j] += v * x[i];
            }
        }
        return y;
    }

    double quadratic_form(const std::vector<double>& x) const {
        std::vector<double> y = multiply(x);
        double q = 0.0;
        for (int i = 0; i < n_; ++i) q += x[i] * y[i];
        return q;
    }

    /// Largest |i - j| over stored entries.
    int bandwidth() const noexcept {
        int bw = 0;
        for (int j = 0; j < n_; ++j)
            for (int p = colptr_[j]; p < colptr_[j + 1]; ++p)
                bw = std::max(bw, rows_[p] - j);
        return bw;
    }

    /// Returns a copy with `delta[i]` added to diagonal entry i.
    SparseSymmetric with_added_diagonal(const std::vector<double>& delta) const {
        if (static_cast<int>(delta.size()) != n_)
            throw ValidationError("with_added_diagonal: dimension mismatch");
        SparseSymmetric m = *this;
        for (int j = 0; j < n_; ++j) m.vals_[m.colptr_[j]] += delta[j];
        return m;
    }

    /// Indices the factorization should eliminate first. Builders set this
    /// for columns whose couplings dwarf their own conditional precision
    /// (fixed effects under the high-precision predictor augmentation);
    /// eliminating them early avoids catastrophic pivot cancellation.
    const std::vector<int>& eliminate_first() const noexcept { return eliminate_first_; }
    void set_eliminate_first(std::vector<int> idx) { eliminate_first_ = std::move(idx); }

    double max_diagonal() const noexcept {
        double d = 0.0;
        for (int j = 0; j < n_; ++j) d = std::max(d, std::abs(vals_[colptr_[j]]));
        return d;
    }

    /// Matrix-market style text dump: `i j value` triplets, 1-based, lower
    /// triangle. Used by the CLI debug flag and oracle scripts.
    void dump_matrix_market(std::ostream& os) const {
        os << "%%MatrixMarket matrix coordinate real symmetric\n";
        os << n_ << " " << n_ << " " << nnz_lower() << "\n";
        char buf[64];
        for (int j = 0; j < n_; ++j) {
            for (int p = colptr_[j]; p < colptr_[j + 1]; ++p) {
                std::snprintf(buf, sizeof buf, "%d %d %.17g\n", rows_[p] + 1, j + 1, vals_[p]);
                os << buf;
            }
        }
    }

private:
    int n_ = 0;
    std::vector<int> colptr_;
    std::vector<int> rows_;
    std::vector<double> vals_;
    std::vector<int> eliminate_first_;
};

}  // namespace inla

#endif
