#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "jdc/errors.hpp"
#include "jdc/model.hpp"

using namespace jdc;

namespace {

ModelSpec with_noise(DriftSpec d) {
    ModelSpec m;
    m.dim = 1;
    m.drift = std::move(d);
    m.diffusion.sigma1 = Mat::Identity(1, 1);
    return m;
}

Status status(const AssumptionReport& r, const char* name) {
    const auto* e = r.find(name);
    REQUIRE(e != nullptr);
    return e->status;
}

}  // namespace

TEST_CASE("linear drift passes D1 and D2") {
    Rng rng = make_stream(1, 0);
    const auto rep = validate_assumptions(with_noise(linear_drift(1.0)), 10000, rng);
    CHECK(status(rep, "D1") == Status::Pass);
    CHECK(status(rep, "D2") == Status::Pass);
    CHECK(status(rep, "kappa_consistency") == Status::Pass);
    CHECK(rep.contraction_applicable);
}

TEST_CASE("expanding drift fails D1") {
    Rng rng = make_stream(1, 0);
    auto d = linear_drift(-1.0);
    const auto rep = validate_assumptions(with_noise(d), 10000, rng);
    CHECK(status(rep, "D1") == Status::Fail);
}

TEST_CASE("piecewise curvature reports the outer constants") {
    Rng rng = make_stream(1, 0);
    const auto rep = validate_assumptions(with_noise(piecewise_drift(2, 1, 4, 2, 1, 1)), 10000, rng);
    CHECK(status(rep, "D1") == Status::Pass);
    REQUIRE(rep.d1.has_value());
    CHECK(rep.d1->first == doctest::Approx(2.0).epsilon(1e-2));
    CHECK(rep.d1->second == doctest::Approx(1.0));
    CHECK(status(rep, "kappa_consistency") == Status::Pass);
}

TEST_CASE("a curvature claim that is too strong is caught") {
    Rng rng = make_stream(2, 0);
    auto d = linear_drift(1.0);
    d.kappa = [](double) { return 1.5; };
    const auto rep = validate_assumptions(with_noise(d), 10000, rng);
    CHECK(status(rep, "kappa_consistency") == Status::Fail);
}

TEST_CASE("validation is deterministic given the seed") {
    Rng a = make_stream(3, 0), b = make_stream(3, 0);
    const auto m = with_noise(piecewise_drift(2, 1, 4, 2, 1, 1));
    const auto ra = validate_assumptions(m, 5000, a);
    const auto rb = validate_assumptions(m, 5000, b);
    REQUIRE(ra.entries.size() == rb.entries.size());
    for (std::size_t i = 0; i < ra.entries.size(); ++i) CHECK(ra.entries[i].witness == rb.entries[i].witness);
}

TEST_CASE("piecewise kappa shape") {
    const auto k = piecewise_kappa(2.0, 1.0, 1.0);
    CHECK(k(0.5) == -2.0);
    CHECK(k(1.5) == doctest::Approx(-0.5));
    CHECK(k(3.0) == 1.0);
}

TEST_CASE("alpha and sigma1 norm") {
    DiffusionSpec d;
    d.sigma1 = 2.0 * Mat::Identity(2, 2);
    CHECK(d.alpha() == doctest::Approx(0.25));
    CHECK(d.sigma1_norm() == doctest::Approx(2.0));
    Mat r(2, 2);
    r << 0.0, -3.0, 3.0, 0.0;
    d.sigma1 = r;
    CHECK(d.alpha() * 9.0 == doctest::Approx(1.0));
    d.sigma1 = Mat::Zero(2, 2);
    CHECK(std::isinf(d.alpha()));
}

TEST_CASE("diffusion splitting") {
    ModelSpec m;
    m.dim = 2;
    m.drift = linear_drift(1.0);
    SUBCASE("scalar") {
        m.diffusion.sigma = [](std::span<const double>) -> Mat { return 2.0 * Mat::Identity(2, 2); };
        Rng rng = make_stream(1, 0);
        const auto s = split_diffusion(m, 1.0, 200, rng);
        const double x[2] = {0.3, -0.1};
        const Mat t = s.model.diffusion.sigma(x);
        CHECK(t(0, 0) == doctest::Approx(std::sqrt(3.0)));
        CHECK(std::abs(t(0, 1)) < 1e-12);
        CHECK(s.model.diffusion.sigma1(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("diagonal entries in [2, 3]") {
        m.diffusion.sigma = [](std::span<const double> x) -> Mat {
            Mat s = Mat::Zero(2, 2);
            s(0, 0) = 2.5 + 0.5 * std::sin(x[0]);
            s(1, 1) = 2.5 + 0.5 * std::cos(x[1]);
            return s;
        };
        Rng rng = make_stream(1, 0);
        const auto s = split_diffusion(m, 1.0, 200, rng);
        const double x[2] = {0.7, 1.9};
        const Mat sig = m.diffusion.sigma(x);
        const Mat t = s.model.diffusion.sigma(x);
        CHECK(t(0, 0) == doctest::Approx(std::sqrt(sig(0, 0) * sig(0, 0) - 1.0)).epsilon(1e-12));
        CHECK(t(1, 1) == doctest::Approx(std::sqrt(sig(1, 1) * sig(1, 1) - 1.0)).epsilon(1e-12));
        const Mat full = Mat::Identity(2, 2) + t * t.transpose();
        CHECK((full - sig * sig.transpose()).norm() < 1e-10);
    }
    SUBCASE("not uniformly elliptic") {
        m.diffusion.sigma = [](std::span<const double>) -> Mat { return 0.5 * Mat::Identity(2, 2); };
        Rng rng = make_stream(1, 0);
        CHECK_THROWS_AS(split_diffusion(m, 1.0, 200, rng), Error);
    }
}

TEST_CASE("brownian curvature with an anisotropic sigma1") {
    ModelSpec m;
    m.dim = 2;
    m.drift = piecewise_drift(2, 1, 4, 2, 1, 1);
    m.diffusion.sigma1 = Mat::Identity(2, 2);
    m.diffusion.sigma1(1, 1) = 2.0;
    const auto k = brownian_kappa(m);
    // kappa+ / s_max^2 and kappa- * alpha with s_max = 2, alpha = 1
    CHECK(k(3.0) == doctest::Approx(0.25));
    CHECK(k(0.5) == doctest::Approx(-2.0));
}
