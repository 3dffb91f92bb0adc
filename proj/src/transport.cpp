#include "jdc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jdc/errors.hpp"
#include "jdc/stats.hpp"

namespace jdc {

double exp_remainder_1(double x) {
    if (std::abs(x) < 1e-3) return x * x * (0.5 + x * (1.0 / 6.0 + x / 24.0));
    return std::expm1(x) - x;
}

double compute_beta(const JumpCoeffSpec& jump, double lam) {
    if (lam == 0.0) return 0.0;
    if (lam < 0.0) throw Error(ErrorCode::InvalidArgument, "compute_beta: lam must be >= 0");
    const double v = jump.intensity.integrate([&](std::span<const double> u) {
        return exp_remainder_1(lam * jump.g_inf(u));
    });
    return std::isfinite(v) && v >= 0.0 ? v : kInf;
}

const char* to_string(DevKind k) {
    switch (k) {
        case DevKind::AlphaT: return "alpha_T";
        case DevKind::AlphaTPath: return "alpha_T_path";
        case DevKind::AlphaInf: return "alpha_infty";
        case DevKind::Custom: return "custom";
    }
    return "?";
}

namespace {

// Largest lam with fn(lam) finite; 0 if none, +inf if fn is finite up to 1e15.
double finiteness_boundary(const std::function<double(double)>& fn) {
    auto ok = [&](double lam) { return std::isfinite(fn(lam)); };
    double lo = 0.0, hi = 1.0;
    if (ok(hi)) {
        lo = hi;
        while (ok(hi *= 2.0)) {
            lo = hi;
            if (hi > 1e15) return kInf;
        }
    } else {
        while (!ok(hi)) {
            hi *= 0.5;
            if (hi < 1e-15) return 0.0;
        }
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ok(mid)) lo = mid;
        else hi = mid;
    }
    return lo;
}

void finish(DeviationFunction& dev) {
    double wmax = 0.0;
    if (dev.weight) {
        for (int i = 0; i <= 1000; ++i) wmax = std::max(wmax, dev.weight(dev.T * i / 1000.0));
    }
    double lmax = kInf;
    if (wmax > 0.0) {
        if (dev.beta) lmax = std::min(lmax, finiteness_boundary(dev.beta) / wmax);
        if (dev.beta_L) lmax = std::min(lmax, finiteness_boundary(dev.beta_L) / wmax);
    }
    dev.lambda_max = lmax;
    const double top = std::isfinite(lmax) ? 0.999 * lmax : 10.0;
    for (int i = 0; i <= 32; ++i) {
        const double lam = top * i / 32.0;
        dev.lam_grid.push_back(lam);
        dev.beta_table.push_back(dev.beta ? dev.beta(lam) : 0.0);
        dev.beta_L_table.push_back(dev.beta_L ? dev.beta_L(lam) : 0.0);
    }
}

}  // namespace

double DeviationFunction::psi(double lam) const {
    if (lam <= 0.0) return 0.0;
    if (custom_psi) return custom_psi(lam);
    if (lam > lambda_max) return kInf;
    double s = 0.5 * gauss * lam * lam;
    if ((beta || beta_L) && T > 0.0 && exp_rate > 0.0) {
        // x = e^{-exp_rate (T - t)} maps the time integral to an analytic integrand on [x0, 1].
        const double x0 = std::exp(-exp_rate * T);
        auto g = [&](double x) {
            const double y = exp_scale * lam * x;
            double v = 0.0;
            if (beta) v += beta(y);
            if (beta_L) v += beta_L(y);
            return v / (exp_rate * x);
        };
        auto composite = [&](int panels) {
            double acc = 0.0;
            for (int i = 0; i < panels; ++i)
                acc += gauss_legendre8(g, x0 + (1.0 - x0) * i / panels, x0 + (1.0 - x0) * (i + 1) / panels);
            return acc;
        };
        const double coarse = composite(8), fine = composite(16);
        if (!std::isfinite(fine)) return kInf;
        if (std::abs(fine - coarse) <= 1e-13 * std::abs(fine) + 1e-300) return s + fine;
        QuadOptions q;
        q.abs_tol = 1e-14;
        const QuadResult r = adaptive_simpson(g, x0, 1.0, q);
        return std::isfinite(r.value) ? s + r.value : kInf;
    }
    if ((beta || beta_L) && T > 0.0) {
        const std::function<double(double)> f = [&](double t) {
            const double x = weight(t) * lam;
            double v = 0.0;
            if (beta) v += beta(x);
            if (beta_L) v += beta_L(x);
            return v;
        };
        QuadOptions q;
        q.abs_tol = 1e-14;
        const QuadResult r = adaptive_simpson(f, 0.0, T, q);
        if (!std::isfinite(r.value)) return kInf;
        s += r.value;
    }
    return s;
}

double DeviationFunction::operator()(double r) const { return eval_alpha(*this, r); }

DeviationFunction make_alpha_general(double T, std::function<double(double)> c1, double c2_T,
                                     std::function<double(double)> c3, double sigma_inf,
                                     std::function<double(double)> beta) {
    DeviationFunction dev;
    dev.kind = DevKind::Custom;
    dev.T = T;
    dev.weight = [c1, T](double t) { return c1(T - t); };
    const double c3sq = c3 ? adaptive_simpson([&](double t) { return c3(t) * c3(t); }, 0.0, T).value : 0.0;
    dev.gauss = sigma_inf * sigma_inf * c2_T * c2_T * c3sq;
    dev.beta = std::move(beta);
    finish(dev);
    return dev;
}

DeviationFunction make_alpha_T(double T, const RateConstants& k, std::function<double(double)> beta,
                               std::function<double(double)> beta_L) {
    DeviationFunction dev;
    dev.kind = DevKind::AlphaT;
    dev.T = T;
    dev.weight = [k, T](double t) { return k.C_tilde * std::exp(-k.c_tilde * (T - t)); };
    dev.exp_scale = k.C_tilde;
    dev.exp_rate = k.c_tilde;
    const double s2 = k.sigma_inf * k.sigma_inf + k.sigma1_norm * k.sigma1_norm;
    dev.gauss = s2 * k.C * k.C * (-std::expm1(-2.0 * k.c * T)) / (2.0 * k.c);
    dev.beta = std::move(beta);
    dev.beta_L = std::move(beta_L);
    finish(dev);
    return dev;
}

DeviationFunction make_alpha_T_path(double T, const RateConstants& k, std::function<double(double)> beta,
                                    std::function<double(double)> beta_L) {
    DeviationFunction dev;
    dev.kind = DevKind::AlphaTPath;
    dev.T = T;
    dev.weight = [k, T](double t) { return k.C_tilde * (-std::expm1(-k.c_tilde * (T - t))) / k.c_tilde; };
    const double s2 = k.sigma_inf * k.sigma_inf + k.sigma1_norm * k.sigma1_norm;
    const double c = k.c;
    const double inner = (T - 2.0 * (-std::expm1(-c * T)) / c + (-std::expm1(-2.0 * c * T)) / (2.0 * c)) / (c * c);
    dev.gauss = s2 * k.C * k.C * inner;
    dev.beta = std::move(beta);
    dev.beta_L = std::move(beta_L);
    finish(dev);
    return dev;
}

DeviationFunction make_alpha_inf(const RateConstants& k, std::function<double(double)> beta,
                                 std::function<double(double)> beta_L, const std::vector<double>& r_check) {
    DeviationFunction a = make_alpha_T(50.0 / k.c_tilde, k, beta, beta_L);
    const DeviationFunction b = make_alpha_T(100.0 / k.c_tilde, k, beta, beta_L);
    a.kind = DevKind::AlphaInf;
    double gap = 0.0;
    for (double r : r_check) {
        const double va = eval_alpha(a, r), vb = eval_alpha(b, r);
        if (va > 0.0) gap = std::max(gap, std::abs(va - vb) / va);
    }
    std::ostringstream os;
    os << "relative gap between T = 50/c and T = 100/c: " << gap;
    if (gap >= 1e-6) os << " (not converged)";
    a.note = os.str();
    return a;
}

DeviationFunction make_alpha_custom(std::function<double(double)> psi, double lambda_max) {
    DeviationFunction dev;
    dev.kind = DevKind::Custom;
    dev.custom_psi = std::move(psi);
    dev.lambda_max = lambda_max;
    return dev;
}

double eval_alpha(const DeviationFunction& dev, double r) {
    if (r <= 0.0) return 0.0;
    if (dev.lambda_max <= 0.0) {
        throw Error(ErrorCode::EmptyFeasibleSet, "beta is infinite for every lam > 0");
    }
    auto obj = [&](double lam) {
        const double p = dev.psi(lam);
        return std::isfinite(p) ? r * lam - p : -kInf;
    };
    // The objective is concave; bracket its maximiser by doubling, capped at 0.999 lambda_max.
    const double cap = std::isfinite(dev.lambda_max) ? 0.999 * dev.lambda_max : kInf;
    double hi = std::min(1.0, cap);
    while (hi < cap && obj(std::min(2.0 * hi, cap)) > obj(hi)) {
        hi = std::min(2.0 * hi, cap);
        if (hi > 1e300) throw Error(ErrorCode::Unbounded, "deviation objective unbounded in lam");
    }
    hi = std::min(2.0 * hi, cap);
    const GoldenResult g = golden_max(obj, 0.0, hi, 1e-13, 600);
    return std::max(0.0, g.value);
}

double convex_conjugate(const std::function<double(double)>& alpha, double lam, double r_cap) {
    auto obj = [&](double r) { return r * lam - alpha(r); };
    double hi = 1.0;
    while (obj(2.0 * hi) > obj(hi)) {
        hi *= 2.0;
        if (hi > r_cap) {
            std::ostringstream os;
            os << "r lam - alpha(r) still increasing at r = " << hi << " for lam = " << lam;
            throw Error(ErrorCode::Unbounded, os.str());
        }
    }
    const GoldenResult g = golden_max(obj, 0.0, 2.0 * hi, 1e-13, 600);
    return std::max(0.0, g.value);
}

MgfReport mgf_check(std::span<const double> samples, const DeviationFunction& dev,
                    const std::vector<double>& lam_grid) {
    if (samples.size() < 10000) throw Error(ErrorCode::InvalidArgument, "mgf_check needs at least 1e4 samples");
    const double mean = pairwise_sum(samples) / static_cast<double>(samples.size());
    MgfReport rep;
    rep.passed = true;
    std::vector<double> v(samples.size());
    for (double lam : lam_grid) {
        MgfRow row;
        row.lam = lam;
        for (std::size_t i = 0; i < samples.size(); ++i) v[i] = std::exp(lam * (samples[i] - mean));
        const MeanEstimate m = batch_mean(v);
        row.empirical = std::log(m.mean);
        row.stderr = m.stderr / m.mean;
        row.explicit_bound = dev.psi(lam);
        row.conjugate = lam == 0.0 ? 0.0 : convex_conjugate([&](double r) { return eval_alpha(dev, r); }, lam);
        row.passed = row.empirical <= row.conjugate + 3.0 * row.stderr &&
                     row.empirical <= row.explicit_bound + 3.0 * row.stderr;
        rep.passed = rep.passed && row.passed;
        rep.rows.push_back(row);
    }
    return rep;
}

TailReport tail_check(std::span<const double> samples, double mu, const DeviationFunction& dev,
                      const std::vector<double>& r_grid, std::size_t n_block) {
    if (n_block == 0 || samples.size() < n_block * 1000) {
        throw Error(ErrorCode::InvalidArgument, "tail_check needs at least n_block * 1e3 samples");
    }
    TailReport rep;
    rep.blocks = samples.size() / n_block;
    std::vector<double> means(rep.blocks);
    for (std::size_t b = 0; b < rep.blocks; ++b) {
        means[b] = pairwise_sum(samples.subspan(b * n_block, n_block)) / static_cast<double>(n_block);
    }
    rep.passed = true;
    for (double r : r_grid) {
        TailRow row;
        row.r = r;
        std::size_t hits = 0;
        for (double m : means) hits += (m - mu > r) ? 1 : 0;
        row.empirical = static_cast<double>(hits) / static_cast<double>(rep.blocks);
        const Interval w = wilson_interval(hits, rep.blocks);
        row.wilson_lo = w.lo;
        row.wilson_hi = w.hi;
        row.bound = std::exp(-static_cast<double>(n_block) * eval_alpha(dev, r));
        row.passed = row.wilson_lo <= row.bound;
        rep.passed = rep.passed && row.passed;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace jdc
