#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "inla/marginal.hpp"
#include "inla/spline.hpp"

using inla::Marginal;

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Marginal std_normal(int n = 75) { return inla::gaussian_marginal(0.0, 1.0, n); }

Marginal uniform01(int n = 21) {
    std::vector<double> xs(n), ds(n, 1.0);
    for (int i = 0; i < n; ++i) xs[i] = static_cast<double>(i) / (n - 1);
    return inla::make_marginal(std::move(xs), std::move(ds));
}

}  // namespace

TEST_CASE("cubic spline reproduces cubics exactly") {
    auto f = [](double x) { return 2.0 - x + 0.5 * x * x - 0.125 * x * x * x; };
    std::vector<double> xs, ys;
    for (int i = 0; i <= 10; ++i) {
        xs.push_back(-2.0 + 0.55 * i);
        ys.push_back(f(xs.back()));
    }
    inla::CubicSpline s(xs, ys);
    for (double x = -1.9; x < 3.4; x += 0.0837)
        CHECK(s(x) == Catch::Approx(f(x)).margin(1e-11));
}

TEST_CASE("spline edge cases: two and three nodes") {
    inla::CubicSpline lin({0.0, 1.0}, {1.0, 3.0});
    CHECK(lin(0.5) == Catch::Approx(2.0));
    CHECK(lin(2.0) == Catch::Approx(5.0));  // linear extrapolation

    auto q = [](double x) { return 1.0 + x * x; };
    inla::CubicSpline par({0.0, 1.0, 2.5}, {q(0.0), q(1.0), q(2.5)});
    CHECK(par(1.7) == Catch::Approx(q(1.7)).margin(1e-12));
}

TEST_CASE("density_at") {
    auto m = std_normal();
    auto d = inla::density_at(m, {0.0, -9.0, 9.0});
    CHECK(d[0] == Catch::Approx(0.39894).margin(1e-4));
    CHECK(d[1] == 0.0);
    CHECK(d[2] == 0.0);

    auto u = uniform01();
    CHECK(inla::density_at(u, {0.5})[0] == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("cdf_at") {
    auto m = std_normal();
    auto c = inla::cdf_at(m, {0.0, m.xs.front(), m.xs.back(), 1.96});
    CHECK(c[0] == Catch::Approx(0.5).margin(1e-4));
    CHECK(c[1] == 0.0);
    CHECK(c[2] == 1.0);
    CHECK(c[3] == Catch::Approx(0.975).margin(1e-3));

    // monotone nondecreasing over a sweep
    std::vector<double> qs;
    for (double q = -6.0; q <= 6.0; q += 0.1) qs.push_back(q);
    auto cs = inla::cdf_at(m, qs);
    for (size_t i = 1; i < cs.size(); ++i) CHECK(cs[i] >= cs[i - 1]);
}

TEST_CASE("quantile_at and roundtrip") {
    auto m = std_normal();
    CHECK(inla::quantile_at(m, {0.5})[0] == Catch::Approx(0.0).margin(1e-4));
    for (double p : {0.025, 0.5, 0.975}) {
        double q = inla::quantile_at(m, {p})[0];
        CHECK(inla::cdf_at(m, {q})[0] == Catch::Approx(p).margin(1e-6));
    }
    CHECK_THROWS_AS(inla::quantile_at(m, {0.0}), inla::ValidationError);
    CHECK_THROWS_AS(inla::quantile_at(m, {1.2}), inla::ValidationError);
}

TEST_CASE("sampling: moments, determinism, KS") {
    auto m = std_normal();
    auto s = inla::sample(m, 100000, 42);
    double mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= s.size();
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 0.02);

    CHECK(inla::sample(m, 5, 7) == inla::sample(m, 5, 7));
    CHECK(inla::sample(m, 0, 7).empty());

    // KS statistic against the marginal's own cdf
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end());
    auto cdfs = inla::cdf_at(m, sorted);
    double ks = 0.0;
    for (size_t i = 0; i < sorted.size(); ++i) {
        double fn_hi = static_cast<double>(i + 1) / sorted.size();
        double fn_lo = static_cast<double>(i) / sorted.size();
        ks = std::max(ks, std::max(std::abs(cdfs[i] - fn_hi), std::abs(cdfs[i] - fn_lo)));
    }
    CHECK(ks < 0.01);
}

TEST_CASE("hpd interval") {
    auto m = std_normal(151);
    auto [lo, hi] = inla::hpd_interval(m, 0.95);
    CHECK(lo == Catch::Approx(-1.96).margin(0.02));
    CHECK(hi == Catch::Approx(1.96).margin(0.02));
    CHECK(std::abs(lo + hi) < 2e-3);  // symmetric about 0

    auto [l2, h2] = inla::hpd_interval(m, 1.0 - 1e-12);
    CHECK(l2 == Catch::Approx(m.xs.front()).margin(1e-9));
    CHECK(h2 == Catch::Approx(m.xs.back()).margin(1e-9));

    // bimodal density must be rejected
    std::vector<double> xs, ds;
    for (int i = 0; i <= 100; ++i) {
        double x = -6.0 + 12.0 * i / 100.0;
        xs.push_back(x);
        ds.push_back(phi(x - 3.0) + phi(x + 3.0));
    }
    auto bim = inla::make_marginal(xs, ds);
    CHECK_THROWS_AS(inla::hpd_interval(bim, 0.5), inla::NumericalError);
}

TEST_CASE("expect") {
    auto m = inla::gaussian_marginal(2.0, 1.0);
    CHECK(inla::expect_scalar(m, [](double x) { return x; }) == Catch::Approx(2.0).margin(1e-3));
    CHECK(inla::expect_scalar(m, [](double) { return 1.0; }) == Catch::Approx(1.0).margin(1e-6));
    auto both = inla::expect(m, [](double x) { return std::vector<double>{x, x * x}; });
    CHECK(both[1] - both[0] * both[0] == Catch::Approx(1.0).margin(5e-3));
}

TEST_CASE("mode") {
    CHECK(inla::mode_of(std_normal()) == Catch::Approx(0.0).margin(1e-3));
    CHECK(inla::mode_of(uniform01()) == 0.0);  // leftmost tie-break
}

TEST_CASE("transform") {
    auto m = std_normal();
    auto same = inla::transform(m, [](double x) { return x; });
    for (size_t i = 0; i < m.xs.size(); i += 7)
        CHECK(same.ds[i] == Catch::Approx(m.ds[i]).margin(1e-6));

    auto shifted = inla::transform(m, [](double x) { return x + 3.5; });
    CHECK(inla::expect_scalar(shifted, [](double x) { return x; }) ==
          Catch::Approx(3.5).margin(2e-3));

    // probability preservation through a monotone map
    auto mapped = inla::transform(m, [](double x) { return std::exp(x / 2.0); });
    for (double q : {-1.0, 0.0, 0.8}) {
        double lhs = inla::cdf_at(mapped, {std::exp(q / 2.0)})[0];
        double rhs = inla::cdf_at(m, {q})[0];
        CHECK(lhs == Catch::Approx(rhs).margin(1e-4));
    }

    CHECK_THROWS_AS(inla::transform(m, [](double x) { return x * x; }), inla::ValidationError);
}

TEST_CASE("summarize") {
    auto m = inla::gaussian_marginal(2.0, 1.0);
    auto s = inla::summarize(m);
    CHECK(s.mean == Catch::Approx(2.0).margin(1e-3));
    CHECK(s.sd == Catch::Approx(1.0).margin(1e-2));
    CHECK(s.q5 == Catch::Approx(2.0).margin(1e-3));
    CHECK(s.q025 == Catch::Approx(2.0 - 1.959964).margin(5e-3));
    CHECK(s.q975 == Catch::Approx(2.0 + 1.959964).margin(5e-3));
}

TEST_CASE("smooth") {
    auto m = std_normal();
    auto fine = inla::smooth(m, 301);
    CHECK(fine.xs.size() == 301);
    CHECK(std::abs(inla::cdf_at(fine, {0.0})[0] - inla::cdf_at(m, {0.0})[0]) < 1e-5);
    CHECK(inla::trapezoid(fine.xs, fine.ds) == Catch::Approx(1.0).margin(1e-6));
    auto same = inla::smooth(m, static_cast<int>(m.xs.size()));
    for (size_t i = 0; i < m.xs.size(); i += 11)
        CHECK(same.ds[i] == Catch::Approx(m.ds[i]).margin(1e-8));
}

TEST_CASE("marginal validation") {
    CHECK_THROWS_AS(inla::make_marginal({0, 1, 2}, {1, 1, 1}), inla::ValidationError);
    std::vector<double> xs(10), ds(10, 1.0);
    for (int i = 0; i < 10; ++i) xs[i] = i;
    xs[4] = xs[3];  // not strictly ascending
    CHECK_THROWS_AS(inla::make_marginal(xs, ds), inla::ValidationError);
}

TEST_CASE("marginal_from_log_points recovers a Gaussian from 11 nodes") {
    std::vector<double> xs, ld;
    for (int i = 0; i < 11; ++i) {
        double z = -4.0 + 8.0 * i / 10.0;
        xs.push_back(z);
        ld.push_back(-0.5 * z * z + 3.0);  // unnormalized on purpose
    }
    auto m = inla::marginal_from_log_points(xs, ld, 401);
    double sup = 0.0;
    for (double x = -3.9; x <= 3.9; x += 0.0513)
        sup = std::max(sup, std::abs(inla::density_at(m, {x})[0] - phi(x)));
    CHECK(sup < 1e-3);
    CHECK(inla::trapezoid(m.xs, m.ds) == Catch::Approx(1.0).margin(1e-6));
}
