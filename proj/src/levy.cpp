#include "jdc/levy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "jdc/errors.hpp"

namespace jdc {

namespace {

// e^x - x - 1 without cancellation for small x.
double exp_remainder(double x) {
    if (std::abs(x) < 1e-3) return x * x * (0.5 + x * (1.0 / 6.0 + x / 24.0));
    return std::expm1(x) - x;
}

QuadResult integrate_chunks_to_infinity(const std::function<double(double)>& f, double a) {
    QuadResult out;
    double lo = a;
    double hi = std::max(2.0 * a, 1.0);
    int quiet = 0;
    for (int chunk = 0; chunk < 200; ++chunk) {
        const QuadResult part = integrate_log(f, lo, hi);
        if (!std::isfinite(part.value)) {
            out.value = kInf;
            return out;
        }
        out.value += part.value;
        out.error += part.error;
        out.converged = out.converged && part.converged;
        const double scale = std::abs(out.value);
        if (std::abs(part.value) <= 1e-15 * scale || (scale == 0.0 && chunk > 60)) {
            if (++quiet >= 3) return out;
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    out.value = kInf;
    out.converged = false;
    return out;
}

}  // namespace

double sphere_area(int n) {
    const double h = 0.5 * n;
    return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

QuadResult integrate_radial(const std::function<double(double)>& f, double a, double b,
                            const std::function<double(double)>* analytic_tail, double tail_from) {
    QuadResult out;
    if (!(b > a)) return out;
    if (std::isfinite(b)) return integrate_log(f, a, b);
    if (analytic_tail != nullptr) {
        const double t0 = std::max(a, tail_from);
        if (t0 > a) out = integrate_log(f, a, t0);
        out.value += (*analytic_tail)(t0);
        return out;
    }
    return integrate_chunks_to_infinity(f, a);
}

QuadResult integrate_from_zero(const std::function<double(double)>& f, double b) {
    QuadResult out;
    if (!(b > 0.0)) return out;
    const double lo = b * 1e-10;
    out = integrate_log(f, lo, b);
    const double f1 = f(lo);
    const double f2 = f(2.0 * lo);
    if (f1 > 0.0 && f2 > 0.0) {
        const double k = std::log2(f2 / f1);
        if (k <= -1.0) {
            out.value = kInf;
            return out;
        }
        out.value += f1 * lo / (k + 1.0);
    }
    return out;
}

RadialLevyMeasure::RadialLevyMeasure(Profile profile, int dim, double cutoff, double support_upper,
                                     std::optional<PowerTail> tail, std::string family,
                                     double max_intensity)
    : profile_(std::move(profile)),
      dim_(dim),
      cutoff_(cutoff),
      support_upper_(support_upper),
      tail_(tail),
      family_(std::move(family)) {
    if (dim_ < 1) throw Error(ErrorCode::InvalidArgument, "measure dimension must be positive");
    if (!(support_upper_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "support_upper must be positive");
    if (!profile_) throw Error(ErrorCode::InvalidArgument, "radial profile missing");
    if (!(cutoff_ > 0.0)) choose_cutoff(max_intensity);
    intensity_ = radial_moment(0.0, cutoff_, kInf);
    if (std::isfinite(intensity_)) build_sampler();
}

RadialLevyMeasure RadialLevyMeasure::stable(double alpha, double scale, int dim, double cutoff,
                                            double max_intensity) {
    if (!(alpha > 0.0 && alpha < 2.0) || !(scale > 0.0))
        throw Error(ErrorCode::InvalidArgument, "stable: need 0 < alpha < 2 and scale > 0");
    const double p = dim + alpha;
    auto q = [scale, p](double r) { return r > 0.0 ? scale * std::pow(r, -p) : 0.0; };
    return RadialLevyMeasure(q, dim, cutoff, kInf, PowerTail{0.0, scale, p}, "stable", max_intensity);
}

RadialLevyMeasure RadialLevyMeasure::tempered_stable(double alpha, double scale, double rate, int dim,
                                                     double cutoff, double max_intensity) {
    if (!(alpha > 0.0 && alpha < 2.0) || !(scale > 0.0) || !(rate > 0.0))
        throw Error(ErrorCode::InvalidArgument, "tempered_stable: bad parameters");
    const double p = dim + alpha;
    auto q = [scale, p, rate](double r) {
        return r > 0.0 ? scale * std::exp(-rate * r) * std::pow(r, -p) : 0.0;
    };
    return RadialLevyMeasure(q, dim, cutoff, kInf, std::nullopt, "tempered_stable", max_intensity);
}

RadialLevyMeasure RadialLevyMeasure::truncated_stable(double alpha, double scale, double upper, int dim,
                                                      double cutoff, double max_intensity) {
    if (!(alpha > 0.0 && alpha < 2.0) || !(scale > 0.0) || !(upper > 0.0))
        throw Error(ErrorCode::InvalidArgument, "truncated_stable: bad parameters");
    const double p = dim + alpha;
    auto q = [scale, p, upper](double r) {
        return (r > 0.0 && r <= upper) ? scale * std::pow(r, -p) : 0.0;
    };
    return RadialLevyMeasure(q, dim, cutoff, upper, std::nullopt, "truncated_stable", max_intensity);
}

RadialLevyMeasure RadialLevyMeasure::gaussian(double mass_density, double width, int dim, double cutoff) {
    if (!(mass_density > 0.0) || !(width > 0.0))
        throw Error(ErrorCode::InvalidArgument, "gaussian: bad parameters");
    auto q = [mass_density, width](double r) {
        return r > 0.0 ? mass_density * std::exp(-0.5 * r * r / (width * width)) : 0.0;
    };
    return RadialLevyMeasure(q, dim, cutoff > 0.0 ? cutoff : 1e-9, kInf, std::nullopt, "gaussian");
}

RadialLevyMeasure RadialLevyMeasure::uniform_ball(double density, double radius, int dim, double cutoff) {
    if (!(density > 0.0) || !(radius > 0.0))
        throw Error(ErrorCode::InvalidArgument, "uniform_ball: bad parameters");
    auto q = [density, radius](double r) { return (r > 0.0 && r <= radius) ? density : 0.0; };
    return RadialLevyMeasure(q, dim, cutoff > 0.0 ? cutoff : 1e-9 * radius, radius, std::nullopt,
                             "uniform_ball");
}

RadialLevyMeasure RadialLevyMeasure::tabulated(std::vector<double> rs, std::vector<double> qs, int dim,
                                               double cutoff, double max_intensity) {
    if (rs.size() < 2 || rs.size() != qs.size())
        throw Error(ErrorCode::InvalidArgument, "tabulated profile needs >= 2 (r, q) rows");
    for (std::size_t i = 0; i < rs.size(); ++i) {
        if (!(rs[i] > 0.0) || !(qs[i] >= 0.0) || (i > 0 && !(rs[i] > rs[i - 1])))
            throw Error(ErrorCode::InvalidArgument, "tabulated profile: r must increase, q >= 0");
    }
    const double upper = rs.back();
    const double lower = rs.front();
    const double q_lower = qs.front();
    auto interp = std::make_shared<MonotoneCubic>(std::move(rs), std::move(qs));
    auto q = [interp, lower, q_lower, upper](double r) {
        if (r <= 0.0 || r > upper) return 0.0;
        if (r < lower) return q_lower;
        return std::max(0.0, (*interp)(r));
    };
    return RadialLevyMeasure(q, dim, cutoff, upper, std::nullopt, "tabulated", max_intensity);
}

double RadialLevyMeasure::radial_density(double r) const {
    if (!(r > 0.0) || r > support_upper_) return 0.0;
    return profile_(r);
}

double RadialLevyMeasure::density(std::span<const double> v) const {
    double s = 0.0;
    for (double x : v) s += x * x;
    return radial_density(std::sqrt(s));
}

double RadialLevyMeasure::truncated_density(std::span<const double> v) const {
    double s = 0.0;
    for (double x : v) s += x * x;
    return truncated_radial_density(std::sqrt(s));
}

double RadialLevyMeasure::radial_moment(double k, double a, double b) const {
    const double upper = std::min(b, support_upper_);
    if (!(upper > a)) return 0.0;
    const double area = sphere_area(dim_);
    const double power = k + dim_ - 1.0;
    const std::function<double(double)> f = [this, power](double r) {
        return std::pow(r, power) * radial_density(r);
    };
    double total = 0.0;
    double lo = a;
    if (a <= 0.0) {
        const double mid = std::min(upper, 1.0);
        const QuadResult near = integrate_from_zero(f, mid);
        if (!std::isfinite(near.value)) return kInf;
        total += near.value;
        lo = mid;
        if (!(upper > lo)) return area * total;
    }
    QuadResult rest;
    if (tail_ && !std::isfinite(upper)) {
        const double p = tail_->exponent;
        const double coeff = tail_->coeff;
        const std::function<double(double)> analytic = [p, coeff, k, this](double t0) {
            const double e = k + dim_ - p;
            return e < 0.0 ? coeff * std::pow(t0, e) / (-e) : kInf;
        };
        rest = integrate_radial(f, lo, upper, &analytic, tail_->from);
    } else {
        rest = integrate_radial(f, lo, upper);
    }
    if (!std::isfinite(rest.value)) return kInf;
    return area * (total + rest.value);
}

namespace {

QuadResult marginal_quad(const RadialLevyMeasure& m, double y) {
    QuadResult out;
    y = std::abs(y);
    const int d = m.dim();
    if (d == 1) {
        out.value = m.radial_density(y);
        return out;
    }
    if (!(y > 0.0)) {
        out.value = kInf;
        out.converged = false;
        return out;
    }
    const double upper = m.support_upper();
    if (y >= upper) return out;
    const double s_max = std::isfinite(upper) ? std::sqrt(upper * upper - y * y) : kInf;
    const double power = d - 2.0;
    const std::function<double(double)> f = [&m, y, power](double s) {
        const double w = power == 0.0 ? 1.0 : std::pow(s, power);
        return w * m.radial_density(std::sqrt(y * y + s * s));
    };
    const double split = std::min(y, s_max);
    out = adaptive_simpson(f, 0.0, split);
    if (s_max > split) {
        QuadResult rest;
        if (m.tail() && !std::isfinite(s_max)) {
            const double p = m.tail()->exponent;
            const double coeff = m.tail()->coeff;
            const std::function<double(double)> analytic = [p, coeff, d](double s0) {
                const double e = d - 1.0 - p;
                return e < 0.0 ? coeff * std::pow(s0, e) / (-e) : kInf;
            };
            const double from = std::max(1e6 * y, m.tail()->from * 1e3);
            rest = integrate_radial(f, split, s_max, &analytic, from);
        } else {
            rest = integrate_radial(f, split, s_max);
        }
        out.value += rest.value;
        out.error += rest.error;
        out.converged = out.converged && rest.converged;
    }
    out.value *= sphere_area(d - 1);
    return out;
}

}  // namespace

double RadialLevyMeasure::marginal_density(double y) const {
    const QuadResult q = marginal_quad(*this, y);
    if (!q.converged || !std::isfinite(q.value))
        throw Error(ErrorCode::MarginalUnavailable, "marginal quadrature failed at y = " + std::to_string(y));
    return q.value;
}

void RadialLevyMeasure::choose_cutoff(double max_intensity) {
    // Residual small-jump variance below 1e-4 of the variance on |y| <= 1.
    cutoff_ = 1e-12;
    const double total = compute_c_eps(*this, 2.0);
    double delta = 1e-6;
    if (total > 0.0 && std::isfinite(total)) {
        double lo = std::log(1e-12), hi = 0.0;
        for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (compute_c_eps(*this, 2.0 * std::exp(mid)) <= 1e-4 * total) lo = mid;
            else hi = mid;
        }
        delta = std::exp(lo);
    }
    if (std::isfinite(max_intensity) && radial_moment(0.0, delta, kInf) > max_intensity) {
        double lo = std::log(delta);
        double hi = std::log(std::isfinite(support_upper_) ? support_upper_ : 1e6);
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (radial_moment(0.0, std::exp(mid), kInf) > max_intensity) lo = mid;
            else hi = mid;
        }
        delta = std::exp(hi);
    }
    cutoff_ = delta;
}

void RadialLevyMeasure::build_sampler() {
    if (!(intensity_ > 0.0)) return;
    if (std::isfinite(support_upper_)) {
        table_upper_ = support_upper_;
    } else if (tail_) {
        table_upper_ = std::max({tail_->from, 1.0, 100.0 * cutoff_});
    } else {
        table_upper_ = std::max(1.0, 10.0 * cutoff_);
        while (radial_moment(0.0, table_upper_, kInf) > 1e-14 * intensity_ && table_upper_ < 1e12)
            table_upper_ *= 2.0;
    }
    if (!(table_upper_ > cutoff_)) table_upper_ = cutoff_ * (1.0 + 1e-12);
    constexpr int kTable = 4096;
    const double area = sphere_area(dim_);
    const double s0 = std::log(cutoff_), s1 = std::log(table_upper_);
    std::vector<double> xs, ys;
    xs.reserve(kTable);
    ys.reserve(kTable);
    double cum = 0.0;
    xs.push_back(0.0);
    ys.push_back(s0);
    auto integrand = [this, area](double s) {
        const double r = std::exp(s);
        return area * std::pow(r, static_cast<double>(dim_)) * radial_density(r);
    };
    for (int i = 1; i < kTable; ++i) {
        const double sa = s0 + (s1 - s0) * (i - 1) / (kTable - 1);
        const double sb = s0 + (s1 - s0) * i / (kTable - 1);
        cum += gauss_legendre8(integrand, sa, sb);
        if (cum > xs.back() * intensity_ * (1.0 + 1e-14) + 1e-300) {
            xs.push_back(cum / intensity_);
            ys.push_back(sb);
        }
    }
    table_mass_ = cum;
    if (xs.size() < 2) {
        xs = {0.0, 1.0};
        ys = {s0, s1};
    }
    inverse_cdf_ = MonotoneCubic(std::move(xs), std::move(ys));
}

double RadialLevyMeasure::sample_radius(Rng& rng) const {
    if (inverse_cdf_.empty()) throw Error(ErrorCode::InvalidArgument, "measure has no finite simulated band");
    const double w = uniform01(rng);
    const double table_frac = inverse_cdf_.x_back();
    if (w <= table_frac || !tail_ || std::isfinite(support_upper_)) {
        return std::exp(inverse_cdf_(std::min(w, table_frac)));
    }
    const double m = (w - table_frac) * intensity_;
    const double p = tail_->exponent;
    const double e = dim_ - p;
    const double base = std::pow(table_upper_, e) - m * (p - dim_) / (sphere_area(dim_) * tail_->coeff);
    if (!(base > 0.0)) return table_upper_ * 1e12;
    return std::pow(base, 1.0 / e);
}

void RadialLevyMeasure::sample_direction(Rng& rng, std::span<double> out) const {
    if (dim_ == 1) {
        out[0] = (rng() >> 63) ? 1.0 : -1.0;
        return;
    }
    std::normal_distribution<double> normal;
    double s = 0.0;
    do {
        s = 0.0;
        for (double& x : out) {
            x = normal(rng);
            s += x * x;
        }
    } while (!(s > 0.0));
    const double inv = 1.0 / std::sqrt(s);
    for (double& x : out) x *= inv;
}

void RadialLevyMeasure::sample_jump(Rng& rng, std::span<double> out) const {
    const double r = sample_radius(rng);
    sample_direction(rng, out);
    for (double& x : out) x *= r;
}

double compute_gamma(const RadialLevyMeasure& measure) {
    const double g = measure.radial_moment(1.0, 1.0, kInf);
    if (!std::isfinite(g)) throw Error(ErrorCode::DivergentTail, "int_{|v|>1} |v| nu(dv) diverges");
    return g;
}

double compute_c_eps(const RadialLevyMeasure& measure, double eps) {
    if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "compute_c_eps: eps must be positive");
    const double upper = std::min(0.5 * eps, measure.support_upper());
    bool ok = true;
    const std::function<double(double)> f = [&measure, &ok](double y) {
        if (measure.dim() == 1) return y * y * measure.radial_density(y);
        const QuadResult q = marginal_quad(measure, y);
        ok = ok && q.converged && std::isfinite(q.value);
        return y * y * q.value;
    };
    const QuadResult r = integrate_from_zero(f, upper);
    if (!ok || !r.converged || !std::isfinite(r.value))
        throw Error(ErrorCode::MarginalUnavailable, "C_eps quadrature did not converge");
    return 2.0 * r.value;
}

L5Probe probe_L5(const RadialLevyMeasure& measure, double lambda_cap) {
    if (!(lambda_cap > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda_cap must be positive");
    L5Probe out;
    for (int k = 0; k <= 40; ++k) {
        const double eps = std::ldexp(lambda_cap, -k);
        const double c = compute_c_eps(measure, eps);
        out.eps.push_back(eps);
        out.ratio.push_back(c > 0.0 ? eps / c : kInf);
        if (!(c > 0.0)) {
            out.witness_eps = eps;
            return out;
        }
    }
    // Least-squares slope of log(ratio) against k over the finest half of the grid.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int k = 20; k <= 40; ++k) {
        const double y = std::log(out.ratio[k]);
        sx += k;
        sy += y;
        sxx += double(k) * k;
        sxy += k * y;
        ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (slope > 1e-2) {
        out.witness_eps = out.eps.back();
        return out;
    }
    out.passed = true;
    out.bound = *std::max_element(out.ratio.begin(), out.ratio.end());
    return out;
}

double check_L5(const RadialLevyMeasure& measure, double lambda_cap) {
    const L5Probe p = probe_L5(measure, lambda_cap);
    if (!p.passed) {
        std::ostringstream msg;
        msg << "eps / C_eps unbounded as eps -> 0 (witness eps = " << p.witness_eps << ")";
        throw Error(ErrorCode::AssumptionViolated, msg.str());
    }
    return p.bound;
}

double compute_beta_L(const RadialLevyMeasure& measure, double lam) {
    if (!(lam >= 0.0)) throw Error(ErrorCode::InvalidArgument, "compute_beta_L: lam must be >= 0");
    if (lam == 0.0) return 0.0;
    const double upper = measure.support_upper();
    if (!std::isfinite(upper) && measure.tail()) return kInf;
    const int d = measure.dim();
    const std::function<double(double)> f = [&measure, lam, d](double r) {
        const double v = exp_remainder(lam * r) * std::pow(r, d - 1.0) * measure.radial_density(r);
        return std::isfinite(v) ? v : kInf;
    };
    const double mid = std::min(upper, 1.0);
    QuadResult near = integrate_from_zero(f, mid);
    if (!std::isfinite(near.value)) return kInf;
    double total = near.value;
    if (upper > mid) {
        const QuadResult rest = integrate_radial(f, mid, upper);
        if (!std::isfinite(rest.value)) return kInf;
        total += rest.value;
    }
    return sphere_area(d) * total;
}

JumpBatch sample_jumps(const RadialLevyMeasure& measure, double dt, Rng& rng) {
    JumpBatch batch;
    batch.dim = measure.dim();
    batch.compensator_drift.assign(static_cast<std::size_t>(measure.dim()), 0.0);
    if (!(dt > 0.0)) return batch;
    if (!std::isfinite(measure.intensity()))
        throw Error(ErrorCode::InvalidArgument, "sample_jumps: infinite mass above the cutoff");
    std::poisson_distribution<long> count(measure.intensity() * dt);
    const long n = measure.intensity() > 0.0 ? count(rng) : 0;
    batch.times.resize(static_cast<std::size_t>(n));
    for (double& t : batch.times) t = dt * uniform01(rng);
    std::sort(batch.times.begin(), batch.times.end());
    batch.vectors.resize(static_cast<std::size_t>(n) * measure.dim());
    for (long i = 0; i < n; ++i) {
        measure.sample_jump(rng, {batch.vectors.data() + i * measure.dim(), static_cast<std::size_t>(measure.dim())});
    }
    return batch;
}

}  // namespace jdc
