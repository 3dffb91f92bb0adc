#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "jdc/errors.hpp"
#include "jdc/levy.hpp"
#include "jdc/stats.hpp"

using namespace jdc;

namespace {

// Monte Carlo estimate of int_a^inf w(r) dr with r = a + Exp(1).
MeanEstimate mc_tail(const std::function<double(double)>& w, double a, std::size_t n, std::uint64_t seed) {
    Rng rng = make_stream(seed, 0);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(n);
    for (auto& x : v) {
        const double s = e(rng);
        x = w(a + s) * std::exp(s);
    }
    return batch_mean(v);
}

}  // namespace

TEST_CASE("gamma of compactly supported and stable measures") {
    CHECK(compute_gamma(RadialLevyMeasure::uniform_ball(1.0, 1.0, 1)) == doctest::Approx(0.0));
    const auto st = RadialLevyMeasure::stable(1.5, 1.0, 1);
    // 2 int_1^inf r^-1.5 dr
    CHECK(compute_gamma(st) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("gamma of a 2-d gaussian profile agrees with a Monte Carlo oracle") {
    const auto g = RadialLevyMeasure::gaussian(1.0, 1.5, 2);
    auto w = [](double r) { return 2.0 * std::numbers::pi * r * r * std::exp(-0.5 * r * r / 2.25); };
    const auto mc = mc_tail(w, 1.0, 1'000'000, 3);
    CHECK(std::abs(compute_gamma(g) - mc.mean) <= 3.0 * mc.stderr);
}

TEST_CASE("C_eps for the 1-d 1.5-stable measure") {
    const auto st = RadialLevyMeasure::stable(1.5, 1.0, 1);
    for (double eps : {1.0, 0.1, 1e-3}) {
        CHECK(compute_c_eps(st, eps) == doctest::Approx(4.0 * std::sqrt(eps / 2.0)).epsilon(1e-8));
    }
}

TEST_CASE("C_eps for a 2-d stable profile uses the first marginal") {
    const double a = 1.2, p = 0.5 * (2.0 + a);
    const auto st = RadialLevyMeasure::stable(a, 1.0, 2);
    // marginal m(y) = k |y|^(1 - 2p), k = sqrt(pi) Gamma(p - 1/2) / Gamma(p)
    const double k = std::sqrt(std::numbers::pi) * std::tgamma(p - 0.5) / std::tgamma(p);
    const double e = 4 - 2 * p;
    for (double eps : {0.5, 0.01}) {
        const double exact = 2.0 * k * std::pow(eps / 2.0, e) / e;
        CHECK(compute_c_eps(st, eps) == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("C_eps is non-decreasing and vanishes with eps") {
    const auto t = RadialLevyMeasure::tempered_stable(1.2, 1.0, 2.0, 1);
    double prev = 0.0;
    for (double eps = 1e-6; eps < 4.0; eps *= 2.0) {
        const double c = compute_c_eps(t, eps);
        CHECK(c >= prev);
        prev = c;
    }
    CHECK(compute_c_eps(RadialLevyMeasure::uniform_ball(1.0, 1.0, 1), 1e-8) < 1e-24);
}

TEST_CASE("L5 gate") {
    CHECK(std::isfinite(check_L5(RadialLevyMeasure::stable(1.5, 1.0, 1), 1.0)));
    CHECK_THROWS_AS(check_L5(RadialLevyMeasure::stable(0.5, 1.0, 1), 1.0), Error);
    RadialLevyMeasure hollow([](double r) { return (r >= 0.5 && r <= 1.0) ? 1.0 : 0.0; }, 1, 0.5, 1.0);
    CHECK_THROWS_AS(check_L5(hollow, 1.0), Error);
}

TEST_CASE("beta_L") {
    const auto u = RadialLevyMeasure::uniform_ball(1.0, 1.0, 1);
    CHECK(compute_beta_L(u, 0.0) == 0.0);
    for (double lam : {0.5, 2.0, 5.0}) {
        const double exact = 2.0 * ((std::exp(lam) - 1.0) / lam - lam / 2.0 - 1.0);
        CHECK(compute_beta_L(u, lam) == doctest::Approx(exact).epsilon(1e-8));
    }
    CHECK(std::isinf(compute_beta_L(RadialLevyMeasure::stable(1.5, 1.0, 1), 0.1)));
    for (double lam = 0.25; lam < 4.0; lam += 0.25) {
        const double mid = compute_beta_L(u, lam);
        CHECK(mid <= 0.5 * (compute_beta_L(u, lam - 0.25) + compute_beta_L(u, lam + 0.25)) + 1e-12);
        CHECK(mid >= 0.0);
    }
}

TEST_CASE("sample_jumps: empty batch for dt = 0") {
    Rng rng = make_stream(1, 0);
    const auto b = sample_jumps(RadialLevyMeasure::stable(1.5, 1.0, 1), 0.0, rng);
    CHECK(b.size() == 0);
    CHECK(b.compensator_drift[0] == 0.0);
}

TEST_CASE("sample_jumps: Poisson counts, symmetric mean, increasing times") {
    const auto u = RadialLevyMeasure::uniform_ball(2.0, 1.0, 1);
    Rng rng = make_stream(5, 0);
    const double dt = 0.01;
    std::size_t count = 0;
    std::vector<double> vs;
    for (int k = 0; k < 100000; ++k) {
        const auto b = sample_jumps(u, dt, rng);
        count += b.size();
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (i > 0) CHECK(b.times[i] > b.times[i - 1]);
            vs.push_back(b.vector(i)[0]);
        }
    }
    const double expected = u.intensity() * dt * 100000;
    CHECK(std::abs(double(count) - expected) <= 3.0 * std::sqrt(expected));
    const auto m = batch_mean(vs);
    CHECK(std::abs(m.mean) <= 3.0 * m.stderr);
}

TEST_CASE("sample_jumps: directions are uniform on the circle") {
    const auto g = RadialLevyMeasure::stable(1.2, 1.0, 2);
    Rng rng = make_stream(8, 0);
    const int bins = 16;
    std::vector<double> h(bins, 0.0);
    const int n = 1'000'000;
    std::vector<double> dir(2);
    for (int i = 0; i < n; ++i) {
        g.sample_direction(rng, dir);
        const double a = std::atan2(dir[1], dir[0]) + std::numbers::pi;
        h[std::min(bins - 1, int(a / (2.0 * std::numbers::pi) * bins))] += 1.0;
    }
    double chi2 = 0.0;
    const double e = double(n) / bins;
    for (double c : h) chi2 += (c - e) * (c - e) / e;
    // chi-square with 15 degrees of freedom, upper 1e-3 point
    CHECK(chi2 < 37.697);
}

TEST_CASE("sampled radii follow the truncated radial law") {
    const auto st = RadialLevyMeasure::stable(1.5, 1.0, 1, 0.1);
    Rng rng = make_stream(9, 0);
    const int n = 200000;
    int above = 0;
    for (int i = 0; i < n; ++i) above += st.sample_radius(rng) > 1.0;
    // P(r > 1 | r > 0.1) = 0.1^1.5
    const double p = std::pow(0.1, 1.5);
    CHECK(std::abs(above / double(n) - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
}
