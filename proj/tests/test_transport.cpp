#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "jdc/errors.hpp"
#include "jdc/stats.hpp"
#include "jdc/transport.hpp"

using namespace jdc;

namespace {

JumpCoeffSpec atom_jumps(double a, double mass) {
    JumpCoeffSpec j;
    j.g = [a](std::span<const double>, std::span<const double> u, std::span<double> out) { out[0] = a * u[0]; };
    j.g_inf = [a](std::span<const double> u) { return a * std::abs(u[0]); };
    j.intensity = MarkMeasure::atoms({{-1.0}, {1.0}}, {0.5 * mass, 0.5 * mass});
    return j;
}

JumpCoeffSpec uniform_jumps(double a) {
    JumpCoeffSpec j = atom_jumps(a, 1.0);
    j.intensity = MarkMeasure::density_1d([](double) { return 0.5; }, -1.0, 1.0);
    return j;
}

RateConstants ou_constants() {
    RateConstants k;
    k.C_tilde = k.C = 2.0;
    k.c_tilde = k.c = 0.6;
    k.sigma1_norm = 1.0;
    return k;
}

void check_alpha_shape(const DeviationFunction& dev, double r_max) {
    CHECK(eval_alpha(dev, 0.0) == 0.0);
    const int n = 40;
    std::vector<double> v(n + 1);
    for (int i = 0; i <= n; ++i) v[i] = eval_alpha(dev, r_max * i / n);
    for (int i = 1; i <= n; ++i) CHECK(v[i] >= v[i - 1] - 1e-12);
    for (int i = 1; i < n; ++i) CHECK(v[i] <= 0.5 * (v[i - 1] + v[i + 1]) + 1e-9 * (1.0 + v[i]));
}

}  // namespace

TEST_CASE("beta for a constant envelope") {
    const auto j = atom_jumps(0.7, 2.0);
    CHECK(compute_beta(j, 0.0) == 0.0);
    for (double lam : {0.1, 1.0, 3.0}) {
        CHECK(compute_beta(j, lam) == doctest::Approx(2.0 * (std::exp(0.7 * lam) - 0.7 * lam - 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("beta for a density on marks matches Monte Carlo") {
    const auto j = uniform_jumps(0.5);
    Rng rng = make_stream(6, 0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double lam = 2.0;
    std::vector<double> v(1'000'000);
    for (auto& x : v) {
        const double s = lam * 0.5 * std::abs(u(rng));
        x = std::exp(s) - s - 1.0;
    }
    const auto mc = batch_mean(v);
    CHECK(std::abs(compute_beta(j, lam) - mc.mean) <= 3.0 * mc.stderr);
    for (double l = 0.5; l < 6.0; l += 0.5)
        CHECK(compute_beta(j, l) <= 0.5 * (compute_beta(j, l - 0.5) + compute_beta(j, l + 0.5)) + 1e-14);
}

TEST_CASE("quadratic psi gives the quadratic rate function") {
    for (double a : {0.5, 2.0}) {
        const auto dev = make_alpha_custom([a](double l) { return 0.5 * a * l * l; });
        CHECK(eval_alpha(dev, 0.0) == 0.0);
        for (double r : {0.1, 1.0, 3.0}) CHECK(eval_alpha(dev, r) == doctest::Approx(r * r / (2 * a)).epsilon(1e-8));
    }
}

TEST_CASE("single jump size: Legendre transform against closed form and a dense grid") {
    const double m = 1.5, a = 0.8;
    const auto dev = make_alpha_custom([=](double l) { return m * (std::exp(l * a) - l * a - 1.0); });
    for (double r : {0.2, 1.0, 4.0}) {
        const double lam = std::log1p(r / (m * a)) / a;
        const double exact = r * lam - m * (std::exp(lam * a) - lam * a - 1.0);
        CHECK(eval_alpha(dev, r) == doctest::Approx(exact).epsilon(1e-8));
        double grid = 0.0;
        for (int i = 0; i <= 200000; ++i) {
            const double l = 10.0 * i / 200000.0;
            grid = std::max(grid, r * l - m * (std::exp(l * a) - l * a - 1.0));
        }
        CHECK(std::abs(eval_alpha(dev, r) - grid) <= 1e-8 * (1.0 + grid));
    }
}

TEST_CASE("convex conjugate") {
    const auto half_sq = [](double r) { return 0.5 * r * r; };
    for (double l : {0.0, 0.5, 2.0}) CHECK(convex_conjugate(half_sq, l) == doctest::Approx(0.5 * l * l).epsilon(1e-9));
    const auto lin = [](double r) { return r; };
    CHECK(convex_conjugate(lin, 0.5) == doctest::Approx(0.0));
    CHECK(convex_conjugate(lin, 1.0) == doctest::Approx(0.0));
    try {
        convex_conjugate(lin, 1.5);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Unbounded);
    }
    const auto quartic = [](double r) { return r * r + 0.25 * r * r * r * r; };
    const auto star = [&](double l) { return convex_conjugate(quartic, l); };
    for (double r : {0.3, 1.0, 2.0}) CHECK(convex_conjugate(star, r) == doctest::Approx(quartic(r)).epsilon(1e-6));
}

TEST_CASE("deviation functions are convex, non-decreasing, zero at zero") {
    const auto k = ou_constants();
    const auto j = uniform_jumps(0.5);
    const std::function<double(double)> beta = [&j](double l) { return compute_beta(j, l); };
    check_alpha_shape(make_alpha_T(2.0, k, beta), 2.0);
    check_alpha_shape(make_alpha_T(2.0, k, {}), 2.0);
    check_alpha_shape(make_alpha_T_path(2.0, k, beta), 2.0);
    const auto inf = make_alpha_inf(k, beta);
    check_alpha_shape(inf, 2.0);
    CHECK(inf.kind == DevKind::AlphaInf);
}

TEST_CASE("alpha_T without jumps is the quadratic with the gaussian constant") {
    const auto k = ou_constants();
    const double T = 2.0;
    const auto dev = make_alpha_T(T, k, {});
    const double g = 4.0 * (1.0 - std::exp(-2.0 * 0.6 * T)) / 1.2;
    for (double r : {0.1, 0.7}) CHECK(eval_alpha(dev, r) == doctest::Approx(r * r / (2 * g)).epsilon(1e-8));
}

TEST_CASE("alpha_T decreases in T towards alpha_inf") {
    const auto k = ou_constants();
    const auto j = uniform_jumps(0.5);
    const std::function<double(double)> beta = [&j](double l) { return compute_beta(j, l); };
    const double r = 0.5;
    double prev = kInf;
    for (double T : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double v = eval_alpha(make_alpha_T(T, k, beta), r);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(eval_alpha(make_alpha_inf(k, beta), r) <= prev + 1e-9);
}

TEST_CASE("mgf check: constant, zero lambda and exact OU samples") {
    const auto k = ou_constants();
    const auto dev = make_alpha_T(2.0, k, {});
    const std::vector<double> c(20000, 1.5);
    const auto rc = mgf_check(c, dev, {0.0, 0.5, 1.0});
    CHECK(rc.passed);
    CHECK(rc.rows[0].empirical == 0.0);
    Rng rng = make_stream(7, 0);
    std::normal_distribution<double> g(0.3 * std::exp(-2.0), std::sqrt(0.5 * (1.0 - std::exp(-4.0))));
    std::vector<double> s(100000);
    for (auto& x : s) x = g(rng);
    const auto r = mgf_check(s, dev, {0.2, 0.5, 1.0, 2.0});
    CHECK(r.passed);
    for (const auto& row : r.rows) CHECK(row.conjugate <= row.explicit_bound + 1e-9);
    CHECK_THROWS_AS(mgf_check(std::vector<double>(100, 0.0), dev, {0.5}), Error);
}

TEST_CASE("tail check") {
    const auto k = ou_constants();
    const auto dev = make_alpha_T(2.0, k, {});
    Rng rng = make_stream(8, 0);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    std::vector<double> s(100000);
    for (auto& x : s) x = g(rng);
    const auto r = tail_check(s, 0.0, dev, {0.0, 0.1, 0.3, 0.5}, 10);
    CHECK(r.passed);
    CHECK(r.rows[0].bound == 1.0);
    // psi = +inf off zero makes alpha identically 0
    const auto flat = make_alpha_custom([](double l) { return l > 0.0 ? kInf : 0.0; });
    CHECK(eval_alpha(flat, 0.7) == 0.0);
    const auto z = tail_check(s, 0.0, flat, {0.05, 0.2}, 10);
    CHECK(z.passed);
    for (const auto& row : z.rows) CHECK(row.bound == 1.0);
}
