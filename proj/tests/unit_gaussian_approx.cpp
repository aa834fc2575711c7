#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "inla/gaussian_approx.hpp"
#include "inla/gmrf.hpp"

using inla::ConditionalGaussian;
using inla::LikelihoodFamily;
using inla::Observation;
using inla::SparseSymmetric;

namespace {

Eigen::MatrixXd to_dense(const SparseSymmetric& q) {
    Eigen::MatrixXd m(q.dim(), q.dim());
    for (int i = 0; i < q.dim(); ++i)
        for (int j = 0; j < q.dim(); ++j) m(i, j) = q.at(i, j);
    return m;
}

}  // namespace

TEST_CASE("gaussian likelihood: one Newton step, exact conditional") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int n : {5, 12, 30}) {
        auto q = inla::build_rw2_precision(n, 0.4).with_added_diagonal(std::vector<double>(n, 0.3));
        const double tau = 1.6;
        auto fam = LikelihoodFamily::gaussian_known(tau);
        std::vector<Observation> obs;
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            y(i) = u(rng) + 0.05 * i;
            obs.push_back({y(i), i, false, 0.0});
        }
        auto g = inla::find_conditional_mode(q, fam, obs, {});
        CHECK(g.newton_iterations <= 1);
        CHECK(g.final_step_norm < 1e-8);

        // dense oracle: P = Q + tau I, mean = P^{-1} tau y
        Eigen::MatrixXd p = to_dense(q) + tau * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd mean = p.ldlt().solve(tau * y);
        for (int i = 0; i < n; ++i) CHECK(g.mode[i] == Catch::Approx(mean(i)).margin(1e-9));
        // the stored precision matches the oracle through its quadratic form,
        // log-determinant and inverse diagonal
        Eigen::MatrixXd cov = p.inverse();
        auto vars = g.variances();
        for (int i = 0; i < n; ++i) CHECK(vars[i] == Catch::Approx(cov(i, i)).margin(1e-9));
        CHECK(g.log_det == Catch::Approx(std::log(p.determinant())).epsilon(1e-10));
        Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(n, -0.5, 0.8);
        std::vector<double> dv(d.data(), d.data() + n);
        CHECK(g.deviation_quadratic(dv) ==
              Catch::Approx(d.transpose() * p * d).epsilon(1e-10));
    }
}

TEST_CASE("poisson single observation matches scalar root") {
    auto q = SparseSymmetric::identity(1);
    std::vector<Observation> obs = {{5.0, 0, false, 0.0}};
    auto g = inla::find_conditional_mode(q, LikelihoodFamily::poisson(), obs, {});

    // oracle: eta solves eta = 5 - exp(eta), by bisection
    double lo = 0.0, hi = 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        ((5.0 - std::exp(mid)) - mid > 0.0 ? lo : hi) = mid;
    }
    double root = 0.5 * (lo + hi);
    CHECK(root == Catch::Approx(1.3066).margin(1e-3));
    CHECK(g.mode[0] == Catch::Approx(root).margin(1e-7));
    CHECK(g.variances()[0] == Catch::Approx(1.0 / (1.0 + std::exp(root))).margin(1e-6));
}

TEST_CASE("missing or absent observations leave the prior") {
    auto q = inla::build_rw2_precision(6, 0.0).with_added_diagonal(std::vector<double>(6, 0.5));
    auto g = inla::find_conditional_mode(q, LikelihoodFamily::poisson(), {}, {});
    for (double v : g.mode) CHECK(v == 0.0);
    CHECK(g.log_det == Catch::Approx(inla::cholesky(q).log_det()).epsilon(1e-13));
    Eigen::MatrixXd qinv = to_dense(q).inverse();
    auto vars = g.variances();
    for (int i = 0; i < 6; ++i) CHECK(vars[i] == Catch::Approx(qinv(i, i)).margin(1e-10));

    std::vector<Observation> all_missing = {{3.0, 0, true, 0.0}, {7.0, 2, true, 0.0}};
    auto g2 = inla::find_conditional_mode(q, LikelihoodFamily::poisson(), all_missing, {});
    for (double v : g2.mode) CHECK(v == 0.0);
}

TEST_CASE("objective is non-decreasing across accepted steps") {
    const int n = 8;
    auto q = inla::build_rw2_precision(n, -1.0).with_added_diagonal(std::vector<double>(n, 0.05));
    std::vector<Observation> obs;
    double ys[n] = {40, 55, 31, 2, 0, 9, 90, 61};
    for (int i = 0; i < n; ++i) obs.push_back({ys[i], i, false, 0.0});
    std::vector<double> trace;
    auto g = inla::find_conditional_mode(q, LikelihoodFamily::poisson(), obs, {}, nullptr, 50,
                                         1e-8, &trace);
    REQUIRE(trace.size() >= 2);
    for (size_t i = 1; i < trace.size(); ++i)
        CHECK(trace[i] >= trace[i - 1] - 1e-9 * (std::abs(trace[i - 1]) + 1.0));
    CHECK(g.final_step_norm < 1e-8);
}

TEST_CASE("iteration cap raises a numerical error") {
    auto q = SparseSymmetric::identity(2, 0.01);
    std::vector<Observation> obs = {{120.0, 0, false, 0.0}, {80.0, 1, false, 0.0}};
    CHECK_THROWS_AS(
        inla::find_conditional_mode(q, LikelihoodFamily::poisson(), obs, {}, nullptr, 1),
        inla::NumericalError);
}

TEST_CASE("log_gaussian_density") {
    auto q = SparseSymmetric::from_triplets(1, {{0, 0, 4.0}});
    auto g = inla::find_conditional_mode(q, LikelihoodFamily::poisson(), {}, {});
    CHECK(inla::log_gaussian_density(g, {0.0}) ==
          Catch::Approx(-0.5 * std::log(2.0 * M_PI) + 0.5 * std::log(4.0)).epsilon(1e-12));
    CHECK(inla::log_gaussian_density(g, {1.0}) ==
          Catch::Approx(-2.0 + 0.5 * std::log(4.0) - 0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));

    // dense multivariate oracle
    const int n = 6;
    auto qq = inla::build_rw2_precision(n, 0.2).with_added_diagonal(std::vector<double>(n, 0.7));
    std::vector<Observation> obs;
    for (int i = 0; i < n; ++i) obs.push_back({0.3 * i, i, false, 0.0});
    auto fam = LikelihoodFamily::gaussian_known(2.0);
    auto cg = inla::find_conditional_mode(qq, fam, obs, {});
    Eigen::MatrixXd p = to_dense(qq) + 2.0 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd x(n);
    x << 0.1, -0.4, 0.9, 0.0, 0.2, -0.3;
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) mu(i) = cg.mode[i];
    double oracle = -0.5 * n * std::log(2.0 * M_PI) + 0.5 * std::log(p.determinant()) -
                    0.5 * (x - mu).transpose() * p * (x - mu);
    std::vector<double> xv(x.data(), x.data() + n);
    CHECK(inla::log_gaussian_density(cg, xv) == Catch::Approx(oracle).margin(1e-10));

    CHECK_THROWS_AS(inla::log_gaussian_density(cg, {1.0}), inla::ValidationError);
}
