#include "jdc/numerics.hpp"

#include <algorithm>
#include <stdexcept>

namespace jdc {

namespace {

struct SimpsonState {
    const std::function<double(double)>& f;
    std::size_t evals = 0;
    std::size_t max_evals = 0;
    int max_depth = 0;
    bool converged = true;
    double err = 0.0;
};

double simpson_recurse(SimpsonState& st, double a, double b, double fa, double fm, double fb,
                       double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = st.f(lm);
    const double frm = st.f(rm);
    st.evals += 2;
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || !std::isfinite(delta)) {
        st.err += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    if (depth >= st.max_depth || st.evals >= st.max_evals || m <= a || m >= b) {
        st.converged = false;
        st.err += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return simpson_recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           simpson_recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

}  // namespace

QuadResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                            const QuadOptions& opt) {
    QuadResult out;
    if (a == b) return out;
    if (b < a) {
        out = adaptive_simpson(f, b, a, opt);
        out.value = -out.value;
        return out;
    }
    const int n = std::max(1, opt.initial_panels);
    const double h = (b - a) / n;
    std::vector<double> xs(2 * n + 1), fs(2 * n + 1);
    for (int i = 0; i <= 2 * n; ++i) {
        xs[i] = (i == 2 * n) ? b : a + 0.5 * h * i;
        fs[i] = f(xs[i]);
    }
    double coarse = 0.0;
    std::vector<double> panels(n);
    for (int i = 0; i < n; ++i) {
        panels[i] = (xs[2 * i + 2] - xs[2 * i]) / 6.0 * (fs[2 * i] + 4.0 * fs[2 * i + 1] + fs[2 * i + 2]);
        coarse += std::abs(panels[i]);
    }
    const double tol = std::max(opt.abs_tol, opt.rel_tol * coarse);
    SimpsonState st{f, static_cast<std::size_t>(2 * n + 1), opt.max_evals, opt.max_depth};
    for (int i = 0; i < n; ++i) {
        out.value += simpson_recurse(st, xs[2 * i], xs[2 * i + 2], fs[2 * i], fs[2 * i + 1], fs[2 * i + 2],
                                     panels[i], tol / n, 0);
    }
    out.error = st.err;
    out.converged = st.converged && std::isfinite(out.value);
    return out;
}

QuadResult integrate_log(const std::function<double(double)>& f, double a, double b,
                         const QuadOptions& opt) {
    if (!(a > 0.0) || !(b >= a)) throw std::invalid_argument("integrate_log: need 0 < a <= b");
    const std::function<double(double)> g = [&f](double s) {
        const double r = std::exp(s);
        return f(r) * r;
    };
    return adaptive_simpson(g, std::log(a), std::log(b), opt);
}

GoldenResult golden_max(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_iter) {
    const double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    GoldenResult best{c, fc};
    if (fd > best.value) best = {d, fd};
    const double fa = f(a), fb = f(b);
    if (fa > best.value) best = {a, fa};
    if (fb > best.value) best = {b, fb};
    return best;
}

MonotoneCubic::MonotoneCubic(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
    const std::size_t n = xs_.size();
    if (n < 2 || ys_.size() != n) throw std::invalid_argument("MonotoneCubic: need >= 2 matching points");
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = xs_[i + 1] - xs_[i];
        if (!(h > 0.0)) throw std::invalid_argument("MonotoneCubic: abscissae must increase");
        delta[i] = (ys_[i + 1] - ys_[i]) / h;
    }
    ms_.assign(n, 0.0);
    ms_[0] = delta[0];
    ms_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        ms_[i] = (delta[i - 1] * delta[i] <= 0.0) ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (delta[i] == 0.0) {
            ms_[i] = ms_[i + 1] = 0.0;
            continue;
        }
        const double a = ms_[i] / delta[i];
        const double b = ms_[i + 1] / delta[i];
        const double s = a * a + b * b;
        if (s > 9.0) {
            const double t = 3.0 / std::sqrt(s);
            ms_[i] = t * a * delta[i];
            ms_[i + 1] = t * b * delta[i];
        }
    }
}

double MonotoneCubic::operator()(double x) const {
    if (x <= xs_.front()) return ys_.front();
    if (x >= xs_.back()) return ys_.back();
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    const double h = xs_[i + 1] - xs_[i];
    const double t = (x - xs_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * ys_[i] + (t3 - 2 * t2 + t) * h * ms_[i] +
           (-2 * t3 + 3 * t2) * ys_[i + 1] + (t3 - t2) * h * ms_[i + 1];
}

double log_add_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

}  // namespace jdc
