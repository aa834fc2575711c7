#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "inla/latent_marginals.hpp"

using inla::ComponentKind;
using inla::HyperPrior;
using inla::LatentComponent;
using inla::LatentGaussianModel;
using inla::LikelihoodFamily;
using inla::Marginal;

namespace {

Eigen::MatrixXd to_dense(const inla::SparseSymmetric& q) {
    Eigen::MatrixXd m(q.dim(), q.dim());
    for (int i = 0; i < q.dim(); ++i)
        for (int j = 0; j < q.dim(); ++j) m(i, j) = q.at(i, j);
    return m;
}

double sup_diff(const Marginal& a, const Marginal& b, double lo, double hi) {
    double sup = 0.0;
    for (int k = 0; k <= 400; ++k) {
        double x = lo + (hi - lo) * k / 400.0;
        sup = std::max(sup, std::abs(inla::density_at(a, {x})[0] - inla::density_at(b, {x})[0]));
    }
    return sup;
}

// Poisson model with a single shared latent effect: y_j ~ Pois(exp(u)),
// u ~ N(0, tau_u). Latent field is (eta..., u).
LatentGaussianModel one_latent_poisson(const std::vector<double>& y, double tau_u) {
    LatentGaussianModel m;
    m.likelihood = LikelihoodFamily::poisson();
    for (size_t i = 0; i < y.size(); ++i)
        m.observations.push_back({y[i], static_cast<int>(i), false, 0.0});
    LatentComponent u{.name = "u", .kind = ComponentKind::Iid};
    u.size = 1;
    u.group.assign(y.size(), 0);
    u.prior = HyperPrior::fixed(tau_u);
    m.components.push_back(u);
    m.validate();
    return m;
}

// quadrature oracle for pi(u | y) in the same (unaugmented) toy
Marginal quad_posterior_u(const std::vector<double>& y, double tau_u) {
    const int n = 2001;
    const double lo = -6.0, hi = 8.0;
    std::vector<double> xs(n), ld(n);
    for (int k = 0; k < n; ++k) {
        double u = lo + (hi - lo) * k / (n - 1);
        double ll = -0.5 * tau_u * u * u;
        for (double yy : y) ll += yy * u - std::exp(u) - std::lgamma(yy + 1.0);
        xs[k] = u;
        ld[k] = ll;
    }
    double mx = *std::max_element(ld.begin(), ld.end());
    std::vector<double> ds(n);
    for (int k = 0; k < n; ++k) ds[k] = std::exp(ld[k] - mx);
    return inla::make_marginal(std::move(xs), std::move(ds));
}

}  // namespace

TEST_CASE("gaussian latent marginal: identity precision tabulates a standard normal") {
    auto q = inla::SparseSymmetric::identity(3);
    auto g = inla::find_conditional_mode(q, LikelihoodFamily::poisson(), {}, {});
    auto m = inla::gaussian_latent_marginal(g, 1);
    CHECK(m.xs.size() == 75);
    CHECK(inla::density_at(m, {0.0})[0] == Catch::Approx(0.3989423).margin(1e-4));
    CHECK(m.xs.front() == Catch::Approx(-5.0).margin(1e-12));
    CHECK(m.xs.back() == Catch::Approx(5.0).margin(1e-12));
}

TEST_CASE("gaussian likelihood: latent marginal equals the dense conditional") {
    const int n = 10;
    auto q = inla::build_rw2_precision(n, 0.3).with_added_diagonal(std::vector<double>(n, 0.4));
    auto fam = LikelihoodFamily::gaussian_known(1.3);
    std::vector<inla::Observation> obs;
    for (int i = 0; i < n; ++i) obs.push_back({std::sin(0.7 * i), i, false, 0.0});
    auto g = inla::find_conditional_mode(q, fam, obs, {});
    auto vars = g.variances();

    Eigen::MatrixXd p = to_dense(q) + 1.3 * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd cov = p.inverse();
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = 1.3 * obs[i].y;
    Eigen::VectorXd mean = cov * b;

    for (int i = 0; i < n; ++i) {
        CHECK(g.mode[i] == Catch::Approx(mean(i)).margin(1e-9));
        CHECK(vars[i] == Catch::Approx(cov(i, i)).margin(1e-9));
        auto mi = inla::gaussian_latent_marginal(g, vars, i);
        auto oracle = inla::gaussian_marginal(mean(i), cov(i, i));
        CHECK(sup_diff(mi, oracle, mean(i) - 3.0, mean(i) + 3.0) < 1e-8);
    }
}

TEST_CASE("laplace equals gaussian for gaussian likelihoods") {
    LatentGaussianModel m;
    m.likelihood = LikelihoodFamily::gaussian_known(1.0);
    std::vector<double> y = {0.1, 0.7, -0.4, 1.6, 0.9, 0.3};
    for (size_t i = 0; i < y.size(); ++i)
        m.observations.push_back({y[i], static_cast<int>(i), false, 0.0});
    LatentComponent f{.name = "f", .kind = ComponentKind::Rw2};
    f.size = 6;
    f.group = {0, 1, 2, 3, 4, 5};
    f.prior = HyperPrior::fixed(2.0);
    m.components.push_back(f);
    m.validate();

    auto cg = inla::find_conditional_mode(m, {});
    auto vars = cg.variances();
    for (int i : {0, 3, 7, 11}) {
        auto gm = inla::gaussian_latent_marginal(cg, vars, i, 161);
        auto lm = inla::laplace_latent_marginal(m, {}, i);
        // renormalize both over the intersection of supports so tail
        // truncation cancels and only the shapes are compared
        std::vector<double> common;
        for (double x : gm.xs)
            if (x >= lm.xs.front() && x <= lm.xs.back()) common.push_back(x);
        REQUIRE(common.size() > 100);
        auto on_common = [&](const Marginal& src) {
            std::vector<double> ds = inla::density_at(src, common);
            return inla::make_marginal(common, std::move(ds));
        };
        auto a = on_common(gm), b = on_common(lm);
        double sup = 0.0;
        for (size_t k = 0; k < a.xs.size(); ++k)
            sup = std::max(sup, std::abs(a.ds[k] - b.ds[k]));
        CHECK(sup < 1e-8);
    }
}

TEST_CASE("poisson one-latent toy: laplace matches quadrature") {
    std::vector<double> y = {4.0};
    auto m = one_latent_poisson(y, 1.0);
    auto oracle = quad_posterior_u(y, 1.0);
    auto lm = inla::laplace_latent_marginal(m, {}, 1);  // index 1 = u
    CHECK(sup_diff(lm, oracle, -1.0, 3.0) < 0.01);
}

TEST_CASE("poisson skew pulls the laplace marginal the right way") {
    std::vector<double> y = {1.0};
    auto m = one_latent_poisson(y, 0.3);
    auto oracle = quad_posterior_u(y, 0.3);
    auto cg = inla::find_conditional_mode(m, {});
    auto vars = cg.variances();
    auto gm = inla::gaussian_latent_marginal(cg, vars, 1);
    auto lm = inla::laplace_latent_marginal(m, {}, 1);

    double mean_g = inla::expect_scalar(gm, [](double x) { return x; });
    double mean_l = inla::expect_scalar(lm, [](double x) { return x; });
    double mean_q = inla::expect_scalar(oracle, [](double x) { return x; });
    REQUIRE(std::abs(mean_q - mean_g) > 1e-3);  // the case is genuinely skewed
    CHECK((mean_l - mean_g) * (mean_q - mean_g) > 0.0);
    CHECK(std::abs(mean_l - mean_q) < std::abs(mean_g - mean_q));
}

TEST_CASE("laplace errors out when too few grid points survive") {
    auto m = one_latent_poisson({4.0}, 1.0);
    std::vector<double> bad_grid = {-3.0, -2.0, 1e200, 2e200, 3e200, 4e200, 5e200, 6e200, 7e200};
    CHECK_THROWS_AS(inla::laplace_latent_marginal(m, {}, 1, bad_grid), inla::NumericalError);
}

TEST_CASE("mix_marginals") {
    auto a = inla::gaussian_marginal(-1.0, 1.0);
    auto b = inla::gaussian_marginal(1.0, 1.0);

    auto single = inla::mix_marginals({{a, 1.0}});
    CHECK(sup_diff(single, a, -3.5, 1.5) < 1e-6);

    auto twin = inla::mix_marginals({{a, 0.5}, {a, 0.5}});
    CHECK(sup_diff(twin, a, -3.5, 1.5) < 1e-6);

    auto mix = inla::mix_marginals({{a, 0.5}, {b, 0.5}});
    CHECK(inla::density_at(mix, {0.0})[0] ==
          Catch::Approx(std::exp(-0.5) / std::sqrt(2.0 * M_PI)).margin(1e-4));
    CHECK(inla::trapezoid(mix.xs, mix.ds) == Catch::Approx(1.0).margin(1e-6));

    CHECK_THROWS_AS(inla::mix_marginals({}), inla::ValidationError);
}
