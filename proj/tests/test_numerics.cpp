#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "jdc/numerics.hpp"
#include "jdc/rng.hpp"
#include "jdc/stats.hpp"

using namespace jdc;

TEST_CASE("adaptive simpson integrates smooth and power integrands") {
    const auto r = adaptive_simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));
    const auto s = adaptive_simpson([](double x) { return std::sqrt(x); }, 0.0, 1.0);
    CHECK(s.value == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("log-scale quadrature handles steep power laws") {
    const auto r = integrate_log([](double x) { return std::pow(x, -1.5); }, 1e-6, 1.0);
    const double exact = 2.0 * (std::pow(1e-6, -0.5) - 1.0);
    CHECK(r.value == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("gauss-legendre is exact for degree 15 polynomials") {
    auto p = [](double x) { return std::pow(x, 15) + 3.0 * std::pow(x, 4); };
    const double exact = 1.0 / 16.0 + 3.0 / 5.0;
    CHECK(gauss_legendre8(p, 0.0, 1.0) == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("golden search finds the maximum of a concave function") {
    const auto g = golden_max([](double x) { return -(x - 0.3) * (x - 0.3); }, 0.0, 1.0);
    CHECK(g.arg == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("monotone cubic stays monotone and interpolates nodes") {
    MonotoneCubic m({0.0, 1.0, 2.0, 3.0}, {0.0, 0.1, 5.0, 5.1});
    CHECK(m(2.0) == doctest::Approx(5.0));
    double prev = -1.0;
    for (int i = 0; i <= 300; ++i) {
        const double v = m(i * 0.01);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("log_add_exp and pairwise_sum") {
    CHECK(log_add_exp(-1e4, -1e4) == doctest::Approx(-1e4 + std::log(2.0)));
    CHECK(log_add_exp(-kInf, 3.0) == 3.0);
    std::vector<double> v(1 << 20, 0.1);
    CHECK(pairwise_sum(v) == doctest::Approx(0.1 * (1 << 20)).epsilon(1e-14));
}

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a = make_stream(42, 3), b = make_stream(42, 3), c = make_stream(42, 4), d = make_stream(42, 3, 1);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}

TEST_CASE("batch mean matches the sample mean") {
    Rng rng = make_stream(1, 0);
    std::normal_distribution<double> n;
    std::vector<double> v(1 << 16);
    for (auto& x : v) x = 2.0 + n(rng);
    const auto m = batch_mean(v);
    CHECK(std::abs(m.mean - 2.0) < 4.0 * m.stderr);
    CHECK(m.stderr == doctest::Approx(1.0 / std::sqrt(double(v.size()))).epsilon(0.5));
}

TEST_CASE("two-sample KS accepts same law and rejects shifted law") {
    Rng rng = make_stream(2, 0);
    std::normal_distribution<double> n;
    std::vector<double> a(5000), b(5000), c(5000);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    for (auto& x : c) x = n(rng) + 0.3;
    CHECK_FALSE(ks_two_sample(a, b).rejected);
    CHECK(ks_two_sample(a, c).rejected);
    CHECK(kolmogorov_sf(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
}

TEST_CASE("wilson interval brackets the proportion") {
    const auto w = wilson_interval(30, 100);
    CHECK(w.lo < 0.3);
    CHECK(w.hi > 0.3);
    CHECK(wilson_interval(0, 100).lo == 0.0);
}

TEST_CASE("least squares recovers a line") {
    std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const auto f = least_squares(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
}
