#include "jdc/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jdc/errors.hpp"
#include "jdc/transport.hpp"

namespace jdc {

namespace {

std::string format_point(std::span<const double> x) {
    std::ostringstream os;
    os.precision(6);
    os << "(";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace

bool DiffusionSpec::has_additive() const {
    if (sigma1.size() == 0 || sigma1.rows() != sigma1.cols()) return false;
    Eigen::JacobiSVD<Mat> svd(sigma1);
    return svd.singularValues().minCoeff() > 1e-300;
}

double DiffusionSpec::alpha() const {
    if (!has_additive()) return kInf;
    Eigen::JacobiSVD<Mat> svd(sigma1);
    const double s = svd.singularValues().minCoeff();
    return 1.0 / (s * s);
}

double DiffusionSpec::sigma1_norm() const {
    if (sigma1.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(sigma1);
    return svd.singularValues().maxCoeff();
}

MarkMeasure MarkMeasure::atoms(std::vector<std::vector<double>> points, std::vector<double> weights) {
    if (points.empty() || points.size() != weights.size())
        throw Error(ErrorCode::InvalidArgument, "mark atoms and weights must match and be non-empty");
    MarkMeasure m;
    m.dim_ = static_cast<int>(points.front().size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (static_cast<int>(points[i].size()) != m.dim_ || !(weights[i] >= 0.0))
            throw Error(ErrorCode::InvalidArgument, "mark atoms need equal dimension and weights >= 0");
        m.mass_ += weights[i];
        m.cumulative_.push_back(m.mass_);
    }
    m.points_ = std::move(points);
    m.weights_ = std::move(weights);
    return m;
}

MarkMeasure MarkMeasure::density_1d(std::function<double(double)> density, double lo, double hi) {
    if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "mark density needs lo < hi");
    MarkMeasure m;
    m.dim_ = 1;
    m.lo_ = lo;
    m.hi_ = hi;
    m.density_ = std::move(density);
    constexpr int kGrid = 1024;
    std::vector<double> xs{0.0}, ys{lo};
    double cum = 0.0;
    for (int i = 1; i < kGrid; ++i) {
        const double a = lo + (hi - lo) * (i - 1) / (kGrid - 1);
        const double b = lo + (hi - lo) * i / (kGrid - 1);
        cum += gauss_legendre8(m.density_, a, b);
        if (cum > xs.back()) {
            xs.push_back(cum);
            ys.push_back(b);
        }
    }
    m.mass_ = adaptive_simpson(m.density_, lo, hi).value;
    if (!(m.mass_ > 0.0) || xs.size() < 2) throw Error(ErrorCode::InvalidArgument, "mark density has zero mass");
    for (double& x : xs) x /= cum;
    m.inverse_ = MonotoneCubic(std::move(xs), std::move(ys));
    return m;
}

void MarkMeasure::sample(Rng& rng, std::span<double> out) const {
    if (!points_.empty()) {
        const double w = uniform01(rng) * mass_;
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), w);
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), points_.size() - 1);
        std::copy(points_[i].begin(), points_[i].end(), out.begin());
        return;
    }
    out[0] = inverse_(uniform01(rng));
}

double MarkMeasure::integrate(const std::function<double(std::span<const double>)>& F) const {
    if (!points_.empty()) {
        double s = 0.0;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (weights_[i] > 0.0) s += weights_[i] * F(points_[i]);
        }
        return s;
    }
    const std::function<double(double)> f = [&](double u) {
        const double d = density_(u);
        return d > 0.0 ? F(std::span<const double>(&u, 1)) * d : 0.0;
    };
    return adaptive_simpson(f, lo_, hi_).value;
}

bool ModelSpec::has_noise() const {
    return diffusion.has_additive() || diffusion.has_multiplicative() || levy.has_value() || jump.has_value();
}

bool ModelSpec::contraction_applicable() const {
    if (diffusion.has_additive()) return true;
    return levy.has_value() && drift.kappa && d2_holds(drift.kappa);
}

const char* to_string(Status s) {
    switch (s) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        case Status::Unknown: return "unknown";
    }
    return "unknown";
}

const AssumptionEntry* AssumptionReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

bool AssumptionReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const AssumptionEntry& e) { return e.status != Status::Fail; });
}

bool d2_holds(const Curvature& kappa) {
    double first = 0.0, last = 0.0;
    for (int k = 0; k <= 60; ++k) {
        const double r = std::ldexp(1.0, -k);
        const double v = std::abs(r * kappa(r));
        if (!std::isfinite(v)) return false;
        if (k == 0) first = v;
        last = v;
    }
    return last <= 1e-6 * std::max(1.0, first);
}

namespace {

std::vector<double> d1_grid(double r_max) {
    std::vector<double> g;
    for (int k = 1; k <= 10000; ++k) g.push_back(k / 100.0);
    for (double r = 100.0 * 1.01; r <= r_max; r *= 1.01) g.push_back(r);
    return g;
}

AssumptionEntry check_d1(const ModelSpec& model, const ValidationOptions& opt,
                         std::optional<std::pair<double, double>>& reported) {
    AssumptionEntry e{"D1", Status::Fail, ""};
    const auto grid = d1_grid(opt.r_max);
    std::vector<double> kap(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) kap[i] = model.drift.kappa(grid[i]);
    double K = kInf;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] >= 0.5 * opt.r_max) K = std::min(K, kap[i]);
    std::ostringstream os;
    if (!(K > 0.0)) {
        std::size_t w = grid.size() - 1;
        os << "kappa(" << grid[w] << ") = " << kap[w] << " <= 0 at large r";
        e.witness = os.str();
        return e;
    }
    std::size_t start = grid.size();
    while (start > 0 && kap[start - 1] >= K) --start;
    const double R = start == 0 ? 0.0 : grid[start];
    reported = std::make_pair(R, K);
    if (model.drift.d1_constants) {
        const auto [R0, K0] = *model.drift.d1_constants;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid[i] > R0 && kap[i] < K0) {
                os << "declared (R, K) = (" << R0 << ", " << K0 << ") violated at r = " << grid[i];
                e.witness = os.str();
                return e;
            }
        }
    }
    e.status = Status::Pass;
    os << "R = " << R << ", K = " << K;
    e.witness = os.str();
    return e;
}

}  // namespace

AssumptionReport validate_assumptions(const ModelSpec& model, std::size_t budget, Rng& rng,
                                      const ValidationOptions& opt) {
    if (budget < 1000) throw Error(ErrorCode::InvalidArgument, "validate_assumptions: budget must be >= 1000");
    AssumptionReport rep;
    const int d = model.dim;

    rep.entries.push_back(check_d1(model, opt, rep.d1));

    {
        AssumptionEntry e{"D2", d2_holds(model.drift.kappa) ? Status::Pass : Status::Fail, ""};
        const double r = std::ldexp(1.0, -60);
        std::ostringstream os;
        os << "|r kappa(r)| at r = 2^-60: " << std::abs(r * model.drift.kappa(r));
        e.witness = os.str();
        rep.entries.push_back(e);
    }

    {
        AssumptionEntry e{"E", Status::Pass, "no jump coefficient"};
        if (model.jump) {
            e.status = Status::Fail;
            e.witness = "beta = +inf on the whole lambda grid";
            for (double lam : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
                const double b = compute_beta(*model.jump, lam);
                if (std::isfinite(b)) {
                    e.status = Status::Pass;
                    std::ostringstream os;
                    os << "beta(" << lam << ") = " << b;
                    e.witness = os.str();
                }
            }
        }
        rep.entries.push_back(e);
    }

    if (model.levy) {
        const auto& m = *model.levy;
        rep.entries.push_back({"L1", Status::Pass, "radial density"});
        try {
            std::ostringstream os;
            os << "gamma = " << compute_gamma(m);
            rep.entries.push_back({"L2", Status::Pass, os.str()});
        } catch (const Error& ex) {
            rep.entries.push_back({"L2", Status::Fail, ex.what()});
        }
        rep.entries.push_back({"L3", Status::Pass, "density given"});
        {
            // Overlap of q and its translate by x, restricted to |v| >= 1e-3.
            AssumptionEntry e{"L4", Status::Unknown, "checked in d = 1 only"};
            if (m.dim() == 1) {
                const double x = 1e-2;
                const std::function<double(double)> f = [&m, x](double v) {
                    return std::min(m.radial_density(std::abs(v)), m.radial_density(std::abs(v + x)));
                };
                const double hi = std::isfinite(m.support_upper()) ? m.support_upper() : 10.0;
                const double ov = adaptive_simpson(f, 1e-3, hi).value + adaptive_simpson(f, -hi, -1e-3).value;
                std::ostringstream os;
                os << "overlap at |x| = 0.01: " << ov;
                e.status = ov > 0.0 ? Status::Pass : Status::Fail;
                e.witness = os.str();
            }
            rep.entries.push_back(e);
        }
        {
            const L5Probe p = probe_L5(m, 1.0);
            std::ostringstream os;
            if (p.passed) os << "K(1) = " << p.bound;
            else os << "ratio diverges, witness eps = " << p.witness_eps;
            rep.entries.push_back({"L5", p.passed ? Status::Pass : Status::Fail, os.str()});
        }
    }

    // Randomized consistency of kappa with the one-sided condition.
    {
        AssumptionEntry e{"kappa_consistency", Status::Pass, ""};
        std::uniform_real_distribution<double> box(-opt.box, opt.box);
        std::vector<double> x(d), y(d), bx(d), by(d), gx(d), gy(d);
        double worst = -kInf;
        std::string worst_at;
        const std::size_t pairs = std::max<std::size_t>(budget, 10000);
        for (std::size_t k = 0; k < pairs; ++k) {
            for (int i = 0; i < d; ++i) x[i] = box(rng);
            if (k % 2 == 0) {
                for (int i = 0; i < d; ++i) y[i] = box(rng);
            } else {
                const double scale = opt.box * std::pow(10.0, -6.0 * uniform01(rng));
                for (int i = 0; i < d; ++i) y[i] = x[i] + scale * (2.0 * uniform01(rng) - 1.0);
            }
            double r2 = 0.0, inner = 0.0;
            model.drift.b(x, bx);
            model.drift.b(y, by);
            for (int i = 0; i < d; ++i) {
                r2 += (x[i] - y[i]) * (x[i] - y[i]);
                inner += (bx[i] - by[i]) * (x[i] - y[i]);
            }
            if (!(r2 > 0.0)) continue;
            double lhs = inner;
            if (model.diffusion.has_multiplicative()) lhs += (model.diffusion.sigma(x) - model.diffusion.sigma(y)).squaredNorm();
            if (model.jump) {
                const auto& j = *model.jump;
                lhs += 0.5 * j.intensity.integrate([&](std::span<const double> u) {
                    j.g(x, u, gx);
                    j.g(y, u, gy);
                    double s = 0.0;
                    for (int i = 0; i < d; ++i) s += (gx[i] - gy[i]) * (gx[i] - gy[i]);
                    return s;
                });
            }
            const double excess = lhs + model.drift.kappa(std::sqrt(r2)) * r2;
            if (excess > worst) {
                worst = excess;
                worst_at = format_point(x) + " vs " + format_point(y);
            }
        }
        std::ostringstream os;
        os << "max excess " << worst << " at " << worst_at;
        e.witness = os.str();
        if (worst > opt.tol) e.status = Status::Fail;
        rep.entries.push_back(e);
    }

    if (model.diffusion.has_multiplicative()) {
        AssumptionEntry e{"sigma_envelope", Status::Pass, ""};
        std::uniform_real_distribution<double> box(-opt.box, opt.box);
        std::vector<double> x(d);
        double worst = 0.0;
        for (std::size_t k = 0; k < budget; ++k) {
            for (int i = 0; i < d; ++i) x[i] = box(rng);
            Eigen::JacobiSVD<Mat> svd(model.diffusion.sigma(x));
            const double s = svd.singularValues().size() ? svd.singularValues().maxCoeff() : 0.0;
            if (s > worst) worst = s;
        }
        std::ostringstream os;
        os << "max ||sigma(x)|| = " << worst << " vs sigma_inf = " << model.diffusion.sigma_inf;
        e.witness = os.str();
        if (worst > model.diffusion.sigma_inf * (1.0 + 1e-12)) e.status = Status::Fail;
        rep.entries.push_back(e);
    }

    if (model.jump) {
        const auto& j = *model.jump;
        AssumptionEntry e{"g_envelope", Status::Pass, ""};
        std::uniform_real_distribution<double> box(-opt.box, opt.box);
        std::vector<double> x(d), u(j.intensity.dim()), gx(d);
        for (std::size_t k = 0; k < budget; ++k) {
            for (int i = 0; i < d; ++i) x[i] = box(rng);
            j.intensity.sample(rng, u);
            j.g(x, u, gx);
            double s = 0.0;
            for (double v : gx) s += v * v;
            if (std::sqrt(s) > j.g_inf(u) * (1.0 + 1e-12) + 1e-15) {
                e.status = Status::Fail;
                e.witness = "|g(x,u)| > g_inf(u) at x = " + format_point(x);
                break;
            }
        }
        const double m2 = j.intensity.integrate([&](std::span<const double> uu) {
            const double g = j.g_inf(uu);
            return g * g;
        });
        if (!std::isfinite(m2)) {
            e.status = Status::Fail;
            e.witness = "int g_inf^2 dnu diverges";
        } else if (e.witness.empty()) {
            std::ostringstream os;
            os << "int g_inf^2 dnu = " << m2;
            e.witness = os.str();
        }
        rep.entries.push_back(e);
    }

    if (model.diffusion.has_additive()) {
        const Mat& s1 = model.diffusion.sigma1;
        const Mat q = s1 * s1.transpose();
        const double scale = q.trace() / d;
        const bool conformal = (q - scale * Mat::Identity(d, d)).norm() <= 1e-12 * std::max(1.0, scale);
        AssumptionEntry e{"alpha_consistency", Status::Unknown, "sigma1 not a scaled orthogonal matrix"};
        if (conformal) {
            Eigen::JacobiSVD<Mat> svd(s1);
            const double smin = svd.singularValues().minCoeff();
            const double v = model.diffusion.alpha() * smin * smin;
            e.status = std::abs(v - 1.0) <= 1e-12 ? Status::Pass : Status::Fail;
            std::ostringstream os;
            os << "alpha * s_min^2 = " << v;
            e.witness = os.str();
        }
        rep.entries.push_back(e);
    }

    rep.contraction_applicable = model.contraction_applicable();
    if (model.diffusion.has_multiplicative() || model.jump) {
        rep.kappa_variant = "full: drift plus multiplicative-noise and jump-coefficient terms";
    } else {
        rep.kappa_variant = "drift only";
    }
    if (model.diffusion.has_additive()) rep.kappa_variant += "; Brownian route rescaled by sigma1";
    return rep;
}

Curvature brownian_kappa(const ModelSpec& model) {
    const double s = model.diffusion.sigma1_norm();
    const double a = model.diffusion.alpha();
    const Curvature k = model.drift.kappa;
    if (!(s > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::SchemeIncompatible, "Brownian route needs invertible sigma1");
    const double inv_s2 = 1.0 / (s * s);
    return [k, inv_s2, a](double r) {
        const double v = k(r);
        return v >= 0.0 ? v * inv_s2 : v * a;
    };
}

Mat symmetric_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NotUniformlyElliptic, "eigendecomposition failed");
    const Vec ev = es.eigenvalues();
    if (ev.minCoeff() < 1e-14) throw Error(ErrorCode::NotUniformlyElliptic, "eigenvalue below 1e-14");
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

SplitResult split_diffusion(const ModelSpec& model, double C, std::size_t budget, Rng& rng, double box) {
    if (!(C > 0.0)) throw Error(ErrorCode::InvalidArgument, "split_diffusion: C must be positive");
    if (!model.diffusion.has_multiplicative())
        throw Error(ErrorCode::InvalidArgument, "split_diffusion: model has no multiplicative diffusion");
    const int d = model.dim;
    const Mat s1 = model.diffusion.sigma1.size() ? model.diffusion.sigma1 : Mat::Zero(d, d);
    const auto sigma = model.diffusion.sigma;
    auto total = [sigma, s1](std::span<const double> x) {
        const Mat s = sigma(x);
        return Mat(s * s.transpose() + s1 * s1.transpose());
    };
    std::uniform_real_distribution<double> u(-box, box);
    std::vector<double> x(d);
    double lambda_sq = kInf;
    for (std::size_t k = 0; k < std::max<std::size_t>(budget, 1); ++k) {
        for (int i = 0; i < d; ++i) x[i] = k == 0 ? 0.0 : u(rng);
        Eigen::SelfAdjointEigenSolver<Mat> es(total(x));
        const double ev = es.eigenvalues().minCoeff();
        lambda_sq = std::min(lambda_sq, ev);
        if (ev - C * C < 1e-14) {
            std::ostringstream os;
            os << "smallest eigenvalue " << ev << " <= C^2 = " << C * C << " at x = " << format_point(x);
            throw Error(ErrorCode::NotUniformlyElliptic, os.str());
        }
    }
    SplitResult out;
    out.model = model;
    out.model.diffusion.sigma1 = C * Mat::Identity(d, d);
    const double c2 = C * C;
    out.model.diffusion.sigma = [total, c2, d](std::span<const double> xx) {
        return symmetric_sqrt(total(xx) - c2 * Mat::Identity(d, d));
    };
    const double M = model.diffusion.sigma_inf;
    out.model.diffusion.sigma_inf = std::sqrt(std::max(0.0, M * M - d * c2));
    out.lambda_sq = lambda_sq;
    out.lipschitz_factor = M / std::sqrt(lambda_sq - c2);
    return out;
}

DriftSpec linear_drift(double K) {
    DriftSpec s;
    s.b = [K](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -K * x[i];
    };
    s.kappa = [K](double) { return K; };
    s.name = "linear";
    return s;
}

DriftSpec double_well_drift(Curvature kappa) {
    DriftSpec s;
    s.b = [](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - x[i] * x[i] * x[i];
    };
    s.kappa = std::move(kappa);
    s.name = "double_well";
    return s;
}

Curvature piecewise_kappa(double L, double R, double K) {
    return [L, R, K](double r) {
        if (r < R) return -L;
        if (r >= R + 1.0) return K;
        return -L + (K + L) * (r - R);
    };
}

DriftSpec piecewise_drift(double a, double beta, double omega, double L, double R, double K) {
    DriftSpec s;
    s.b = [a, beta, omega](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = -a * x[i] + beta * std::sin(omega * x[i]);
    };
    s.kappa = piecewise_kappa(L, R, K);
    s.name = "piecewise";
    return s;
}

}  // namespace jdc
