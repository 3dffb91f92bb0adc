#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "jdc/errors.hpp"
#include "jdc/estimators.hpp"
#include "jdc/lyapunov.hpp"

using namespace jdc;

namespace {

ModelSpec ou(double K = 1.0) {
    ModelSpec m;
    m.dim = 1;
    m.drift = linear_drift(K);
    m.diffusion.sigma1 = Mat::Identity(1, 1);
    return m;
}

ModelSpec ou_jumps(double a) {
    ModelSpec m = ou();
    JumpCoeffSpec j;
    j.g = [a](std::span<const double>, std::span<const double> u, std::span<double> out) { out[0] = a * u[0]; };
    j.g_inf = [a](std::span<const double> u) { return a * std::abs(u[0]); };
    j.intensity = MarkMeasure::atoms({{-1.0}, {1.0}}, {0.5, 0.5});
    m.jump = j;
    return m;
}

std::vector<double> normals(std::size_t n, std::uint64_t seed, double shift = 0.0) {
    Rng rng = make_stream(seed, 0);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (auto& x : v) x = shift + g(rng);
    return v;
}

}  // namespace

TEST_CASE("synchronous linear decay rate") {
    EnsembleOptions o;
    o.n_paths = 200;
    o.record_every = 100;
    const std::vector<double> x0{1.0}, y0{-1.0};
    const double dt = 1e-3;
    const auto e = run_ensemble(ou(2.0), CouplingScheme{}, x0, y0, 3.0, dt, o);
    const auto f = fit_decay(e, {}, 1.0);
    // exact geometric decay (1 - K dt)^n
    CHECK(f.rate == doctest::Approx(-std::log(1.0 - 2.0 * dt) / dt).epsilon(1e-9));
    const auto g = fit_decay(e, {}, 1.5);
    CHECK(std::abs(g.rate - f.rate) < 1e-10);
}

TEST_CASE("all paths coupled before the window gives a degenerate sentinel") {
    EnsembleOptions o;
    o.n_paths = 200;
    const std::vector<double> x0{0.1};
    const auto e = run_ensemble(ou(), CouplingScheme{SchemeKind::Reflection}, x0, x0, 2.0, 1e-3, o);
    const auto f = fit_decay(e, {}, 1.0);
    CHECK(f.degenerate);
    CHECK(std::isinf(f.rate));
}

TEST_CASE("OU reflection rate is at least the certified rate") {
    const Curvature k = [](double) { return 1.0; };
    const auto fn = build_f_brownian(k, 1.0);
    EnsembleOptions o;
    o.n_paths = 4000;
    o.seed = 12;
    const std::vector<double> x0{1.0}, y0{-1.0};
    const auto e = run_ensemble(ou(), CouplingScheme{SchemeKind::Reflection}, x0, y0, 4.0, 1e-3, o);
    const auto f = fit_decay(e, {}, 0.5);
    CHECK(f.rate >= fn.constants.c - 3.0 * f.stderr_rate);
}

TEST_CASE("empirical W1 examples") {
    const std::vector<double> z(50, 0.0), one(50, 1.0);
    CHECK(empirical_w1(z, z, 1).value == 0.0);
    CHECK(empirical_w1(z, one, 1).value == doctest::Approx(1.0));
    const auto a = normals(10000, 1);
    std::vector<double> b = a;
    for (auto& x : b) x += 0.5;
    CHECK(empirical_w1(a, b, 1).value == doctest::Approx(0.5).epsilon(1e-12));
    const auto c = normals(10000, 2, 0.5);
    const auto w = empirical_w1(a, c, 1);
    CHECK(w.method == W1Method::Exact1d);
    CHECK(std::abs(w.value - 0.5) < 0.05);
}

TEST_CASE("assignment W1 agrees with brute force on small sets") {
    Rng rng = make_stream(3, 0);
    std::normal_distribution<double> g;
    const int n = 6;
    std::vector<double> a(2 * n), b(2 * n);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    double best = kInf;
    do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += std::hypot(a[2 * i] - b[2 * perm[i]], a[2 * i + 1] - b[2 * perm[i] + 1]);
        best = std::min(best, s / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto w = empirical_w1(a, b, 2);
    CHECK(w.method == W1Method::Assignment);
    CHECK(w.value == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("W1 metric axioms on random triples") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto a = normals(400, 10 * s, 0.0), b = normals(400, 10 * s + 1, 0.3), c = normals(400, 10 * s + 2, -0.2);
        const double ab = empirical_w1(a, b, 2).value, bc = empirical_w1(b, c, 2).value, ac = empirical_w1(a, c, 2).value;
        CHECK(ab >= 0.0);
        CHECK(ab == doctest::Approx(empirical_w1(b, a, 2).value).epsilon(1e-12));
        CHECK(ac <= ab + bc + 1e-12);
    }
    CHECK_THROWS_AS(empirical_w1(normals(10, 1), normals(12, 1), 2), Error);
}

TEST_CASE("W1 contractivity check") {
    const Curvature k = [](double) { return 1.0; };
    const auto fn = build_f_brownian(k, 1.0);
    EnsembleOptions o;
    o.n_paths = 400;
    o.record_every = 500;
    const auto mu = normals(400, 4, 1.0), eta = normals(400, 5, -1.0);
    const auto r = w1_contractivity_check(ou(), CouplingScheme{SchemeKind::Reflection}, mu, eta, 3.0, 1e-3, o,
                                          fn.constants.C, fn.constants.c);
    CHECK(r.passed);
    const auto same = w1_contractivity_check(ou(), CouplingScheme{SchemeKind::Reflection}, mu, mu, 1.0, 1e-3, o,
                                             fn.constants.C, fn.constants.c);
    CHECK(same.w1_initial == 0.0);
    CHECK_FALSE(same.note.empty());
}

TEST_CASE("difference operator: zero mark, zero horizon, and the bound") {
    const Functional f = [](std::span<const double> x) { return x[0]; };
    ExperimentOptions o;
    o.n_paths = 1000;
    const std::vector<double> x0{0.3};
    const CouplingScheme s{SchemeKind::Reflection};
    const auto zero = malliavin_difference_experiment(ou_jumps(0.5), s, f, 0.5, std::vector<double>{0.0}, 1.5, x0,
                                                      2.0, 0.6, o);
    CHECK(zero.estimate == 0.0);
    const auto now = malliavin_difference_experiment(ou_jumps(0.5), s, f, 0.5, std::vector<double>{1.0}, 0.5, x0,
                                                     2.0, 0.6, o);
    CHECK(now.estimate == doctest::Approx(0.5));
    CHECK(now.mean_g == doctest::Approx(0.5));
    const auto later = malliavin_difference_experiment(ou_jumps(0.5), s, f, 0.5, std::vector<double>{1.0}, 2.5, x0,
                                                       2.0, 0.6, o);
    CHECK(later.lipschitz_ok);
    CHECK(later.passed);
}

TEST_CASE("directional derivative: zero direction and the linear closed form") {
    const Functional f = [](std::span<const double> x) { return x[0]; };
    DirectionalOptions o;
    o.n_paths = 200;
    const std::vector<double> x0{0.2};
    const Perturbation zero = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    const auto z = malliavin_brownian_experiment(ou(), zero, 0.0, f, 1.0, x0, 2.0, 0.6, o);
    CHECK(z.extrapolated == 0.0);
    const Perturbation one = [](double, std::span<const double>, std::span<double> out) { out[0] = 1.0; };
    const auto r = malliavin_brownian_experiment(ou(), one, 1.0, f, 1.0, x0, 2.0, 0.6, o);
    const double exact = 1.0 - std::pow(1.0 - o.dt, 1000.0);
    CHECK(r.extrapolated == doctest::Approx(exact).epsilon(1e-9));
    CHECK(r.within_bound);
}
