#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "inla/cholesky.hpp"
#include "inla/gmrf.hpp"
#include "inla/sparse.hpp"

using inla::CholeskyFactor;
using inla::SparseSymmetric;

namespace {

Eigen::MatrixXd to_dense(const SparseSymmetric& q) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q.dim(), q.dim());
    for (int i = 0; i < q.dim(); ++i)
        for (int j = 0; j < q.dim(); ++j) m(i, j) = q.at(i, j);
    return m;
}

Eigen::MatrixXd factor_dense_L(const CholeskyFactor& f) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(f.dim(), f.dim());
    for (int j = 0; j < f.dim(); ++j)
        for (int p = f.colptr()[j]; p < f.colptr()[j + 1]; ++p)
            l(f.rows()[p], j) = f.values()[p];
    return l;
}

// Random sparse SPD matrix: banded-ish random B, Q = B B^T + c I.
SparseSymmetric random_spd(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (std::abs(i - j) <= 2 && u(rng) > 0.0) b(i, j) = u(rng);
    Eigen::MatrixXd q = b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    std::vector<std::tuple<int, int, double>> trip;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            if (q(i, j) != 0.0) trip.emplace_back(i, j, q(i, j));
    return SparseSymmetric::from_triplets(n, std::move(trip));
}

double reconstruction_error(const SparseSymmetric& q, const CholeskyFactor& f) {
    Eigen::MatrixXd dense = to_dense(q);
    const auto& perm = f.permutation();
    Eigen::MatrixXd qp(q.dim(), q.dim());
    for (int a = 0; a < q.dim(); ++a)
        for (int b = 0; b < q.dim(); ++b) qp(a, b) = dense(perm[a], perm[b]);
    Eigen::MatrixXd l = factor_dense_L(f);
    return (l * l.transpose() - qp).norm() / qp.norm();
}

}  // namespace

TEST_CASE("iid precision builder") {
    auto q = inla::build_iid_precision(3, std::log(2.0));
    REQUIRE(q.dim() == 3);
    REQUIRE(q.nnz_lower() == 3);
    for (int i = 0; i < 3; ++i) CHECK(q.at(i, i) == Catch::Approx(2.0).epsilon(1e-14));
    CHECK(q.at(0, 1) == 0.0);

    auto one = inla::build_iid_precision(1, 0.0);
    CHECK(one.at(0, 0) == 1.0);

    auto salm = inla::build_iid_precision(5, std::log(20.84));
    for (int i = 0; i < 5; ++i) CHECK(salm.at(i, i) == Catch::Approx(20.84).epsilon(1e-12));

    CHECK_THROWS_AS(inla::build_iid_precision(0, 0.0), inla::ValidationError);
}

TEST_CASE("rw2 precision builder") {
    auto q = inla::build_rw2_precision(4, 0.0);
    double expect[4][4] = {{1, -2, 1, 0}, {-2, 5, -4, 1}, {1, -4, 5, -2}, {0, 1, -2, 1}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(q.at(i, j) == Catch::Approx(expect[i][j]).margin(1e-14));

    for (int T : {5, 9, 17}) CHECK(inla::build_rw2_precision(T, 0.7).bandwidth() == 2);

    // Null space: constants and linear ramps give exactly zero quadratic form
    // (tau = 1 and dyadic coefficients keep the arithmetic exact).
    auto q8 = inla::build_rw2_precision(8, 0.0);
    std::vector<double> ones(8, 0.5), ramp(8);
    for (int t = 0; t < 8; ++t) ramp[t] = 0.5 + 0.25 * t;
    CHECK(q8.quadratic_form(ones) == 0.0);
    CHECK(q8.quadratic_form(ramp) == 0.0);
    auto q8s = inla::build_rw2_precision(8, std::log(3.0));
    CHECK(std::abs(q8s.quadratic_form(ramp)) < 1e-12);

    CHECK_THROWS_AS(inla::build_rw2_precision(2, 0.0), inla::ValidationError);
}

TEST_CASE("cholesky basics") {
    auto eye = SparseSymmetric::identity(4);
    auto f = inla::cholesky(eye);
    for (int j = 0; j < 4; ++j) {
        CHECK(f.permutation()[j] == j);
        CHECK(f.values()[f.colptr()[j]] == 1.0);
    }

    auto d = SparseSymmetric::from_triplets(2, {{0, 0, 4.0}, {1, 1, 9.0}});
    auto fd = inla::cholesky(d);
    CHECK(fd.values()[fd.colptr()[0]] == 2.0);
    CHECK(fd.values()[fd.colptr()[1]] == 3.0);

    auto rw2 = inla::build_rw2_precision(6, 0.0);
    std::vector<double> jitter(6, 1e-5);
    auto qp = rw2.with_added_diagonal(jitter);
    auto fq = inla::cholesky(qp);
    CHECK(reconstruction_error(qp, fq) < 1e-10);
}

TEST_CASE("cholesky rejects indefinite matrices with failing index") {
    // Leading 2x2 block is fine; third pivot goes negative.
    auto q = SparseSymmetric::from_triplets(
        3, {{0, 0, 4.0}, {1, 1, 1.0}, {2, 2, 1.0}, {2, 0, 4.0}});
    try {
        inla::cholesky(q, false);
        FAIL("expected NotPositiveDefiniteError");
    } catch (const inla::NotPositiveDefiniteError& e) {
        CHECK(e.index() == 2);
    }

    // Singular RW2 without jitter must also fail.
    CHECK_THROWS_AS(inla::cholesky(inla::build_rw2_precision(6, 0.0), false),
                    inla::NotPositiveDefiniteError);
}

TEST_CASE("log_det and solve against dense oracle") {
    CHECK(inla::cholesky(SparseSymmetric::identity(5)).log_det() == Catch::Approx(0.0).margin(1e-15));
    auto d = SparseSymmetric::from_triplets(2, {{0, 0, 2.0}, {1, 1, 8.0}});
    CHECK(inla::cholesky(d).log_det() == Catch::Approx(std::log(16.0)).epsilon(1e-13));

    std::mt19937_64 rng(1234);
    for (int n : {8, 10, 23, 50}) {
        auto q = random_spd(n, rng);
        auto f = inla::cholesky(q);
        Eigen::MatrixXd dense = to_dense(q);

        double oracle_logdet = std::log(dense.determinant());
        CHECK(f.log_det() == Catch::Approx(oracle_logdet).epsilon(1e-10).margin(1e-10));

        std::uniform_real_distribution<double> u(-2.0, 2.0);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) b(i) = u(rng);
        Eigen::VectorXd xo = dense.ldlt().solve(b);
        std::vector<double> bv(b.data(), b.data() + n);
        auto x = f.solve(bv);
        for (int i = 0; i < n; ++i) CHECK(x[i] == Catch::Approx(xo(i)).margin(1e-9));

        // residual contract
        auto r = q.multiply(x);
        double rinf = 0.0, binf = 0.0;
        for (int i = 0; i < n; ++i) {
            rinf = std::max(rinf, std::abs(r[i] - bv[i]));
            binf = std::max(binf, std::abs(bv[i]));
        }
        CHECK(rinf / binf < 1e-10);

        CHECK(reconstruction_error(q, f) < 1e-10);
    }

    CHECK_THROWS_AS(inla::cholesky(SparseSymmetric::identity(3)).solve({1.0, 2.0}),
                    inla::ValidationError);

    // identity and pure-diagonal solves
    auto fi = inla::cholesky(SparseSymmetric::identity(3));
    auto xi = fi.solve({1.0, 2.0, 3.0});
    CHECK(xi[0] == 1.0);
    CHECK(xi[2] == 3.0);
    auto f24 = inla::cholesky(SparseSymmetric::from_triplets(2, {{0, 0, 2.0}, {1, 1, 4.0}}));
    auto x24 = f24.solve({2.0, 4.0});
    CHECK(x24[0] == Catch::Approx(1.0));
    CHECK(x24[1] == Catch::Approx(1.0));
}

TEST_CASE("marginal variances by Takahashi recursion") {
    auto eye3 = inla::cholesky(SparseSymmetric::identity(3));
    for (double v : eye3.marginal_variances()) CHECK(v == Catch::Approx(1.0).epsilon(1e-14));

    auto d = inla::cholesky(SparseSymmetric::from_triplets(2, {{0, 0, 2.0}, {1, 1, 5.0}}));
    auto mv = d.marginal_variances();
    CHECK(mv[0] == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(mv[1] == Catch::Approx(0.2).epsilon(1e-14));

    auto q = inla::build_rw2_precision(8, 0.0).with_added_diagonal(std::vector<double>(8, 1.0));
    auto f = inla::cholesky(q);
    Eigen::MatrixXd inv = to_dense(q).inverse();
    auto v = f.marginal_variances();
    for (int i = 0; i < 8; ++i) CHECK(v[i] == Catch::Approx(inv(i, i)).margin(1e-9));

    // And on unstructured random SPD instances (exercises the AMD path).
    std::mt19937_64 rng(77);
    for (int n : {12, 30}) {
        auto qr = random_spd(n, rng);
        auto fr = inla::cholesky(qr);
        Eigen::MatrixXd invr = to_dense(qr).inverse();
        auto vr = fr.marginal_variances();
        for (int i = 0; i < n; ++i) CHECK(vr[i] == Catch::Approx(invr(i, i)).margin(1e-9));
    }
}

TEST_CASE("symmetric storage answers both orientations") {
    auto q = inla::build_rw2_precision(7, 0.3);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) CHECK(q.at(i, j) == q.at(j, i));
}

TEST_CASE("amd ordering keeps star graphs fill-free") {
    // Hub-first natural order would fill completely; AMD must avoid that.
    const int n = 40;
    std::vector<std::tuple<int, int, double>> trip;
    trip.emplace_back(0, 0, double(n));
    for (int i = 1; i < n; ++i) {
        trip.emplace_back(i, i, 2.0);
        trip.emplace_back(i, 0, -0.5);
    }
    auto q = SparseSymmetric::from_triplets(n, std::move(trip));
    auto f = inla::cholesky(q);
    CHECK(f.colptr()[n] == 2 * n - 1);  // no fill-in
    CHECK(reconstruction_error(q, f) < 1e-12);
}

TEST_CASE("matrix market dump") {
    auto q = SparseSymmetric::from_triplets(2, {{0, 0, 1.5}, {1, 0, -0.25}, {1, 1, 2.0}});
    std::ostringstream os;
    q.dump_matrix_market(os);
    CHECK(os.str() ==
          "%%MatrixMarket matrix coordinate real symmetric\n"
          "2 2 3\n"
          "1 1 1.5\n"
          "2 1 -0.25\n"
          "2 2 2\n");
}
