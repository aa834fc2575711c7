#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "inla/integration.hpp"

using inla::SupportPoint;
using inla::ThetaPosterior;

namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// standardized Gaussian target with given per-axis precisions
std::shared_ptr<ThetaPosterior> gaussian_target(std::vector<double> prec) {
    int d = static_cast<int>(prec.size());
    auto tp = std::make_shared<ThetaPosterior>(d, [prec](const std::vector<double>& th) {
        double s = 0.0;
        for (size_t j = 0; j < th.size(); ++j) s -= 0.5 * prec[j] * th[j] * th[j];
        return s;
    });
    tp->set_mode(std::vector<double>(d, 0.0), 0.0);
    std::vector<std::vector<double>> h(d, std::vector<double>(d, 0.0));
    for (int j = 0; j < d; ++j) h[j][j] = prec[j];
    tp->set_hessian(h);
    return tp;
}

}  // namespace

TEST_CASE("1-d grid on a standard normal target") {
    auto tp = gaussian_target({1.0});
    auto pts = inla::grid_strategy(*tp, 1.0, 2.5);

    // kept lattice: z^2/2 <= 2.5 -> {-2,...,2}; the pm3 frontier is excluded
    REQUIRE(pts.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(pts[k].theta[0] == Catch::Approx(-2.0 + k).margin(1e-12));

    auto w = inla::normalized_weights(pts);
    double sum = 0.0, mean = 0.0;
    for (size_t k = 0; k < pts.size(); ++k) {
        sum += w[k];
        mean += w[k] * pts[k].theta[0];
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(mean) < 1e-10);  // symmetry forces mean zero
}

TEST_CASE("2-d grid point count is the product of per-axis counts") {
    auto tp = gaussian_target({1.0, 1.0});
    auto pts = inla::grid_strategy(*tp, 1.0, 2.5);
    // per-axis drop: z^2/2; diagonal points drop (zi^2+zj^2)/2
    // kept: all lattice points with (zi^2+zj^2)/2 <= 2.5
    std::set<std::pair<int, int>> got;
    for (auto& p : pts) got.insert({int(std::lround(p.z[0])), int(std::lround(p.z[1]))});
    int expected = 0;
    for (int a = -3; a <= 3; ++a)
        for (int b = -3; b <= 3; ++b)
            if (0.5 * (a * a + b * b) <= 2.5) ++expected;
    CHECK(static_cast<int>(got.size()) == expected);
    CHECK(got.size() == pts.size());
}

TEST_CASE("grid is invariant under slot permutation") {
    auto tp1 = gaussian_target({1.0, 4.0});
    auto tp2 = gaussian_target({4.0, 1.0});
    auto p1 = inla::grid_strategy(*tp1, 1.0, 2.5);
    auto p2 = inla::grid_strategy(*tp2, 1.0, 2.5);
    REQUIRE(p1.size() == p2.size());
    std::set<std::pair<long, long>> s1, s2;
    for (auto& p : p1) s1.insert({std::lround(1e6 * p.theta[0]), std::lround(1e6 * p.theta[1])});
    for (auto& p : p2) s2.insert({std::lround(1e6 * p.theta[1]), std::lround(1e6 * p.theta[0])});
    CHECK(s1 == s2);
}

TEST_CASE("grid guard trips on flat targets") {
    auto tp = std::make_shared<ThetaPosterior>(2, [](const std::vector<double>&) { return 0.0; });
    tp->set_mode({0.0, 0.0}, 0.0);
    tp->set_hessian({{1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS(inla::grid_strategy(*tp, 1.0, 2.5, 1, 400), inla::NumericalError);
}

TEST_CASE("ccd point counts") {
    auto tp2 = gaussian_target({1.0, 1.0});
    CHECK(inla::ccd_strategy(*tp2).size() == 9);  // 1 + 2*2 + 2^2
    auto tp3 = gaussian_target({1.0, 1.0, 1.0});
    CHECK(inla::ccd_strategy(*tp3).size() == 15);  // 1 + 6 + 8
}

TEST_CASE("ccd weights integrate Gaussian moments") {
    for (int d : {2, 3, 4}) {
        auto tp = gaussian_target(std::vector<double>(d, 1.0));
        auto pts = inla::ccd_strategy(*tp);
        auto w = inla::normalized_weights(pts);
        for (int j = 0; j < d; ++j) {
            double second = 0.0;
            for (size_t k = 0; k < pts.size(); ++k) second += w[k] * pts[k].z[j] * pts[k].z[j];
            CHECK(second == Catch::Approx(1.0).margin(1e-9));  // within 5% by contract
        }
    }
}

TEST_CASE("ccd falls back to the grid in one dimension") {
    auto tp = gaussian_target({1.0});
    auto pts = inla::ccd_strategy(*tp);
    CHECK(pts.size() == 5);
}

TEST_CASE("eb strategy is a single unit-weight point") {
    auto tp = gaussian_target({1.0, 2.0});
    auto pts = inla::eb_strategy(*tp);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].weight == 1.0);
    CHECK(pts[0].theta == tp->mode());
    CHECK(inla::log_marginal_likelihood(*tp) == Catch::Approx(tp->log_posterior_at_mode()));
}

TEST_CASE("auto selection: grid for dim <= 2, ccd beyond") {
    inla::IntegrationOptions opt;
    auto tp2 = gaussian_target({1.0, 1.0});
    auto p2 = inla::run_strategy(*tp2, opt);
    CHECK(p2.size() > 9);  // grid, not ccd
    auto tp3 = gaussian_target({1.0, 1.0, 1.0});
    auto p3 = inla::run_strategy(*tp3, opt);
    CHECK(p3.size() == 15);  // ccd
}

TEST_CASE("grid mixture cdf error against the exact Gaussian") {
    // theta ~ N(0,1), conditional x | theta ~ N(theta, 1) -> x ~ N(0, 2).
    auto run = [&](double step, double cutoff) {
        auto tp = gaussian_target({1.0});
        auto pts = inla::grid_strategy(*tp, step, cutoff);
        auto w = inla::normalized_weights(pts);
        double sup = 0.0;
        for (double x = -7.0; x <= 7.0; x += 0.01) {
            double mix = 0.0;
            for (size_t k = 0; k < pts.size(); ++k) mix += w[k] * Phi(x - pts[k].theta[0]);
            sup = std::max(sup, std::abs(mix - Phi(x / std::sqrt(2.0))));
        }
        return sup;
    };
    double e_10 = run(1.0, 2.5), e_05 = run(0.5, 2.5), e_025 = run(0.25, 2.5);
    CHECK(e_10 < 0.01);
    CHECK(e_05 < 0.01);
    CHECK(e_025 < 0.01);
    // joint refinement (finer step with matching wider cutoff) does improve
    CHECK(run(0.5, 4.5) < e_10);
    CHECK(run(0.25, 8.0) < run(0.5, 4.5));
}

TEST_CASE("log marginal likelihood from support points") {
    auto tp = gaussian_target({1.0});
    inla::grid_strategy(*tp, 0.5, 12.5);
    // target is exp(-z^2/2): integral sqrt(2 pi)
    CHECK(inla::log_marginal_likelihood(*tp) ==
          Catch::Approx(0.5 * std::log(2.0 * M_PI)).margin(1e-4));

    ThetaPosterior fresh(1, [](const std::vector<double>&) { return 0.0; });
    CHECK_THROWS_AS(inla::log_marginal_likelihood(fresh), inla::ValidationError);
}

TEST_CASE("theta marginal from recorded evaluations (dim 1)") {
    auto tp = gaussian_target({1.0});
    inla::grid_strategy(*tp, 0.5, 8.0);
    auto m = inla::normalized_theta_marginal(*tp, 0);
    CHECK(inla::trapezoid(m.xs, m.ds) == Catch::Approx(1.0).margin(1e-6));
    double sup = 0.0;
    for (double x = -3.5; x <= 3.5; x += 0.05) {
        double d = inla::density_at(m, {x})[0];
        sup = std::max(sup, std::abs(d - std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI)));
    }
    CHECK(sup < 1e-3);
}

TEST_CASE("theta marginal for multi-dimensional theta uses support points") {
    auto tp = gaussian_target({1.0, 1.0, 1.0});
    CHECK_THROWS_AS(inla::normalized_theta_marginal(*tp, 0), inla::ValidationError);
    inla::ccd_strategy(*tp);
    auto m = inla::normalized_theta_marginal(*tp, 1);
    CHECK(inla::trapezoid(m.xs, m.ds) == Catch::Approx(1.0).margin(1e-6));
    CHECK(std::abs(inla::expect_scalar(m, [](double x) { return x; })) < 0.05);
    CHECK_THROWS_AS(inla::normalized_theta_marginal(*tp, 7), inla::ValidationError);
}
