#include "jdc/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "jdc/errors.hpp"

namespace jdc {

const char* to_string(FnKind k) { return k == FnKind::Brownian ? "brownian" : "jump"; }

namespace {

template <class F>
double gl4(F&& f, double a, double b) {
    static constexpr double x[2] = {0.3399810435848563, 0.8611363115940526};
    static constexpr double w[2] = {0.6521451548625461, 0.3478548451374538};
    const double m = 0.5 * (a + b), h = 0.5 * (b - a);
    return h * (w[0] * (f(m - h * x[0]) + f(m + h * x[0])) + w[1] * (f(m - h * x[1]) + f(m + h * x[1])));
}

double hermite(double t, double h, double y0, double y1, double m0, double m1) {
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
}

double hermite_slope(double t, double h, double y0, double y1, double m0, double m1) {
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y0 + (-6 * t2 + 6 * t) * y1) / h + (3 * t2 - 4 * t + 1) * m0 + (3 * t2 - 2 * t) * m1;
}

// inf{R >= 0 : fn(r) >= 0 for all r >= R}, scanning a graded grid up to r_scan.
double last_negative_crossing(const std::function<double(double)>& fn, double r_scan, const char* what) {
    std::vector<double> grid;
    for (int i = 0; i <= 10000; ++i) grid.push_back(i * 1e-3);
    for (int i = 1; i <= 9000; ++i) grid.push_back(10.0 + i * 1e-2);
    for (double r = 100.0 + 0.1; r <= r_scan + 1e-9; r += 0.1) grid.push_back(r);
    std::ptrdiff_t last = -1;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (fn(grid[i]) < 0.0) last = static_cast<std::ptrdiff_t>(i);
    if (last < 0) return 0.0;
    if (static_cast<std::size_t>(last) + 1 >= grid.size()) {
        std::ostringstream os;
        os << what << " still negative at r = " << grid.back() << " (dissipativity at infinity fails)";
        throw Error(ErrorCode::AssumptionViolated, os.str());
    }
    double lo = grid[last], hi = grid[last + 1];
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (fn(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return hi;
}

}  // namespace

double find_R0(const Curvature& kappa, double r_scan) {
    return last_negative_crossing(kappa, r_scan, "kappa");
}

std::uint64_t hash_doubles(const std::vector<double>& v) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double x : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffU;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Brownian route

namespace detail {

struct BState {
    double G = 0.0;    // int_0^r s kappa^-(s) ds
    double Phi = 0.0;  // int_0^r phi
    double J = 0.0;    // int_0^r Phi / phi
    double K = 0.0;    // int_0^r phi J
};

struct BrownianTables {
    Curvature kappa;
    double alpha = 1.0;
    double c = 0.0;
    double R1 = 0.0;
    std::size_t idx_R1 = 0;
    std::vector<double> r;  // fine nodes, r[0] = 0
    std::vector<BState> s;
    std::vector<double> f, fp, fpp;
    std::vector<double> fpp_right;  // differs from fpp only at R1

    double kneg(double x) const {
        const double k = kappa(x);
        return k < 0.0 ? -x * k : 0.0;
    }

    BState advance(const BState& a_state, double a, double t) const {
        auto G = [&](double u) { return a_state.G + gl4([&](double v) { return kneg(v); }, a, u); };
        auto phi = [&](double u) { return std::exp(-0.5 * G(u)); };
        auto Phi = [&](double u) { return a_state.Phi + gl4(phi, a, u); };
        auto J = [&](double u) { return a_state.J + gl4([&](double v) { return Phi(v) / phi(v); }, a, u); };
        BState out;
        out.G = G(t);
        out.Phi = Phi(t);
        out.J = J(t);
        out.K = a_state.K + gl4([&](double v) { return phi(v) * J(v); }, a, t);
        return out;
    }

    BState state_at(double x) const {
        auto it = std::upper_bound(r.begin(), r.end(), x);
        std::size_t i = static_cast<std::size_t>(it - r.begin());
        i = i == 0 ? 0 : i - 1;
        if (r[i] == x) return s[i];
        return advance(s[i], r[i], x);
    }

    struct Local {
        double f, fp, fpp_left, fpp_right;
    };

    Local local(double x, const BState& st) const {
        const double phi = std::exp(-0.5 * st.G);
        const double kn = kneg(x);
        Local out{};
        if (x < R1) {
            const double g = 1.0 - 0.5 * c * alpha * st.J;
            out.f = st.Phi - 0.5 * c * alpha * st.K;
            out.fp = phi * g;
            out.fpp_left = out.fpp_right = -0.5 * kn * phi * g - 0.5 * c * alpha * st.Phi;
        } else {
            const BState& sr = s[idx_R1];
            const double fR1 = sr.Phi - 0.5 * c * alpha * sr.K;
            out.f = fR1 + 0.5 * (st.Phi - sr.Phi);
            out.fp = 0.5 * phi;
            out.fpp_left = out.fpp_right = -0.25 * kn * phi;
            if (x == R1) out.fpp_left = -0.5 * kn * phi * 0.5 - 0.5 * c * alpha * st.Phi;
        }
        return out;
    }
};

}  // namespace detail

namespace {

std::vector<double> brownian_grid(double R0, double R1, const BrownianOptions& opt) {
    const double r_max = 4.0 * std::max(R0, R1);
    std::vector<double> g;
    for (int i = 0; i < opt.log_points; ++i) {
        const double r = std::pow(10.0, -8.0 + 8.0 * i / (opt.log_points - 1));
        if (r < r_max) g.push_back(r);
    }
    if (r_max > 1.0) {
        for (int j = 1; j <= opt.linear_points; ++j) g.push_back(1.0 + (r_max - 1.0) * j / opt.linear_points);
    } else {
        g.push_back(r_max);
    }
    if (R0 > 0.0) g.push_back(R0);
    g.push_back(R1);
    std::sort(g.begin(), g.end());
    std::vector<double> out;
    for (double r : g) {
        if (!out.empty() && r - out.back() <= 1e-12 * r) {
            if (r == R1 || r == R0) out.back() = r;
            continue;
        }
        out.push_back(r);
    }
    return out;
}

ConcaveDistanceFn assemble_brownian(const Curvature& kappa, double alpha, double R0, double R1, double C,
                                    const BrownianOptions& opt) {
    auto t = std::make_shared<detail::BrownianTables>();
    t->kappa = kappa;
    t->alpha = alpha;
    t->R1 = R1;
    const std::vector<double> nodes = brownian_grid(R0, R1, opt);
    t->r.reserve(2 * nodes.size() + 1);
    t->r.push_back(0.0);
    double prev = 0.0;
    for (double x : nodes) {
        t->r.push_back(0.5 * (prev + x));
        t->r.push_back(x);
        prev = x;
    }
    t->s.resize(t->r.size());
    for (std::size_t i = 1; i < t->r.size(); ++i) t->s[i] = t->advance(t->s[i - 1], t->r[i - 1], t->r[i]);
    t->idx_R1 = static_cast<std::size_t>(std::find(t->r.begin(), t->r.end(), R1) - t->r.begin());
    if (t->idx_R1 >= t->r.size()) throw Error(ErrorCode::InvalidArgument, "R1 is not a grid node");
    t->c = 1.0 / (alpha * t->s[t->idx_R1].J);
    const std::size_t n = t->r.size();
    t->f.resize(n);
    t->fp.resize(n);
    t->fpp.resize(n);
    t->fpp_right.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto loc = t->local(t->r[i], t->s[i]);
        t->f[i] = loc.f;
        t->fp[i] = loc.fp;
        t->fpp[i] = loc.fpp_left;
        t->fpp_right[i] = loc.fpp_right;
    }

    ConcaveDistanceFn fn;
    fn.kind = FnKind::Brownian;
    for (std::size_t i = 2; i < n; i += 2) {
        fn.grid.push_back(t->r[i]);
        fn.values.push_back(t->f[i]);
        fn.first_deriv.push_back(t->fp[i]);
        fn.second_deriv.push_back(t->fpp_right[i]);
    }
    fn.tail_slope = t->fp.back();
    fn.tail_intercept = t->f.back() - fn.tail_slope * t->r.back();
    const double phi_R0 = 2.0 / C;
    fn.a1 = 0.5 * phi_R0;
    fn.log_a1 = std::log(fn.a1);
    fn.a2 = 1.0;
    fn.constants.c = t->c;
    fn.constants.C = C;
    fn.constants.R0 = R0;
    fn.constants.R1 = R1;
    fn.constants.alpha = alpha;
    fn.brownian = std::move(t);
    return fn;
}

}  // namespace

ConcaveDistanceFn build_f_brownian(const Curvature& kappa, double alpha, const BrownianOptions& opt) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive and finite");
    const double R0 = find_R0(kappa);
    double G0 = 0.0;
    if (R0 > 0.0) {
        const std::function<double(double)> integrand = [&kappa](double s) {
            const double k = kappa(s);
            return k < 0.0 ? -s * k : 0.0;
        };
        G0 = adaptive_simpson(integrand, 0.0, R0).value;
    }
    if (!(0.5 * G0 < 700.0)) {
        std::ostringstream os;
        os << "phi(R0) = exp(-" << 0.5 * G0 << ") underflows";
        throw Error(ErrorCode::CurvatureUnbounded, os.str());
    }
    const double C = 2.0 * std::exp(0.5 * G0);

    auto passes = [&](double R1) {
        const ConcaveDistanceFn fn = assemble_brownian(kappa, alpha, R0, R1, C, opt);
        CertifyParams p;
        p.tol = opt.certify_tol;
        return certify(fn, FnKind::Brownian, kappa, p).passed;
    };

    double R1 = 0.0;
    if (opt.R1) {
        R1 = *opt.R1;
        if (R1 < R0) throw Error(ErrorCode::InvalidArgument, "R1 must be >= R0");
    } else {
        const double base = std::max(R0, 0.05);
        double fail = -1.0;
        bool found = false;
        for (int k = 0; k <= 160; ++k) {
            const double cand = base * std::pow(2.0, k / 4.0);
            if (passes(cand)) {
                R1 = cand;
                found = true;
                break;
            }
            fail = cand;
        }
        if (!found) throw Error(ErrorCode::NonConvergent, "no certified R1 on the candidate grid");
        if (fail > 0.0) {
            double lo = fail, hi = R1;
            while (hi - lo > opt.bisection_rel * hi) {
                const double mid = 0.5 * (lo + hi);
                if (passes(mid)) hi = mid;
                else lo = mid;
            }
            R1 = hi;
        }
    }
    return assemble_brownian(kappa, alpha, R0, R1, C, opt);
}

// ---------------------------------------------------------------------------
// Jump route

namespace detail {

struct JumpTables {
    Curvature kappa;
    double p = 0.0;
    int w = 32;
    std::size_t N = 0;    // nodes 0..N carry f and logJ
    std::size_t ext = 0;  // extra nodes for Phi(r + eps)
    std::size_t n1 = 0;   // R1 = n1 * p
    double C = 0.0, eps = 0.0, delta = 0.0, gamma = 0.0, M = 0.0;
    double log_c1 = -kInf, logI = 0.0;
    std::vector<double> hbar;  // per cell, N + ext cells
    std::vector<double> H;     // -log phi per node
    std::vector<double> Phi;
    std::vector<double> logJ;
    std::vector<double> f;

    double k(std::size_t c) const { return hbar[c] / C; }

    // int_0^s e^{-k u} du
    static double e_int(double kk, double s) { return kk == 0.0 ? s : -std::expm1(-kk * s) / kk; }

    double Phi_in(std::size_t j, double u) const { return Phi[j] + std::exp(-H[j]) * e_int(k(j), u); }

    // int_0^s Phi(r_i + eps + u) e^{k_i u} du
    double Q(std::size_t i, double s) const {
        const double ki = k(i);
        return gl4([&](double u) { return Phi_in(i + w, u) * std::exp(ki * u); }, 0.0, s);
    }

    double g_node(std::size_t i) const { return i < n1 ? 1.0 - 0.5 * std::exp(logJ[i] - logI) : 0.5; }

    struct Local {
        double H, g, f;
    };

    Local local(std::size_t i, double s) const {
        Local out;
        const double ki = k(i);
        out.H = H[i] + ki * s;
        if (i >= n1) {
            out.g = 0.5;
            out.f = f[i] + 0.5 * std::exp(-H[i]) * e_int(ki, s);
            return out;
        }
        const double base = std::exp(logJ[i] - logI);
        const double scale = std::exp(H[i] - logI);
        auto g_at = [&](double u) { return 1.0 - 0.5 * (base + scale * Q(i, u)); };
        out.g = g_at(s);
        out.f = f[i] + std::exp(-H[i]) * gl4([&](double u) { return std::exp(-ki * u) * g_at(u); }, 0.0, s);
        return out;
    }
};

}  // namespace detail

namespace {

struct LocalBound {
    const Curvature& kappa;
    double operator()(double lambda) const {
        constexpr int n = 4096;
        double best = 0.0, prev = 0.0, modulus = 0.0;
        for (int j = 1; j <= n; ++j) {
            const double r = lambda * j / n;
            const double v = std::abs(r * kappa(r));
            best = std::max(best, v);
            if (j > 1) modulus = std::max(modulus, std::abs(v - prev));
            prev = v;
        }
        return best + modulus;
    }
};

// Smallest M satisfying the feasibility display, by monotone fixed-point iteration.
std::optional<double> feasible_M(double delta, double eps, double C_eps, double gamma, const LocalBound& K) {
    const double Kd = K(delta), Kde = K(delta + eps), Kd2e = K(delta + 2.0 * eps);
    auto lhs = [&](double M) {
        const double x = eps / C_eps * (2.0 * gamma + 2.0 * M + Kd2e);
        if (x > 700.0) return kInf;
        return (Kd + 2.0 * gamma) * (4.0 + 2.0 * x * std::exp(x)) + 2.0 * Kde;
    };
    double M = 0.0;
    for (int it = 0; it < 100000; ++it) {
        const double next = 0.5 * lhs(M);
        if (!std::isfinite(next) || next > 1e6) return std::nullopt;
        if (next - M <= 1e-13 * next) {
            double cand = next * (1.0 + 1e-9) + 1e-12;
            if (lhs(cand) <= 2.0 * cand) return cand;
            return std::nullopt;
        }
        M = next;
    }
    return std::nullopt;
}

struct JumpSetup {
    double delta, eps, C_eps, M, r_star;
};

std::shared_ptr<detail::JumpTables> jump_base(const Curvature& kappa, const JumpSetup& js, double gamma,
                                              double r_cover, const JumpOptions& opt) {
    auto t = std::make_shared<detail::JumpTables>();
    t->kappa = kappa;
    t->w = opt.pitch_divisor;
    t->p = js.eps / t->w;
    t->C = js.C_eps;
    t->eps = js.eps;
    t->delta = js.delta;
    t->gamma = gamma;
    t->M = js.M;
    const double r_end = std::max(js.r_star, r_cover) + 2.0 * js.eps;
    t->N = static_cast<std::size_t>(std::ceil(r_end / t->p));
    t->ext = static_cast<std::size_t>(t->w) + 1;
    if (t->N + t->ext > opt.max_nodes) {
        std::ostringstream os;
        os << "jump construction needs " << t->N << " grid nodes (cap " << opt.max_nodes << ")";
        throw Error(ErrorCode::FeasibilitySearchFailed, os.str());
    }
    const std::size_t total = t->N + t->ext;
    const std::size_t w = static_cast<std::size_t>(t->w);
    // h^- on nodes, sampled one window further than needed.
    std::vector<double> hneg(total + w + 2);
    for (std::size_t i = 0; i < hneg.size(); ++i) {
        const double r = i * t->p;
        const double h = r * kappa(r) - 2.0 * gamma - 2.0 * js.M;
        hneg[i] = h < 0.0 ? -h : 0.0;
    }
    t->hbar.assign(total, 0.0);
    for (std::size_t c = 0; c < total; ++c) {
        double mx = 0.0, mod = 0.0;
        for (std::size_t j = c; j <= c + w + 1; ++j) {
            mx = std::max(mx, hneg[j]);
            if (j > c) mod = std::max(mod, std::abs(hneg[j] - hneg[j - 1]));
        }
        t->hbar[c] = mx > 0.0 ? mx + mod : 0.0;
    }
    t->H.assign(total + 1, 0.0);
    t->Phi.assign(total + 1, 0.0);
    for (std::size_t c = 0; c < total; ++c) {
        t->H[c + 1] = t->H[c] + t->k(c) * t->p;
        t->Phi[c + 1] = t->Phi[c] + std::exp(-t->H[c]) * detail::JumpTables::e_int(t->k(c), t->p);
    }
    t->logJ.assign(t->N + 1, -kInf);
    for (std::size_t i = 0; i < t->N; ++i) {
        t->logJ[i + 1] = log_add_exp(t->logJ[i], t->H[i] + std::log(t->Q(i, t->p)));
    }
    return t;
}

ConcaveDistanceFn jump_finalize(const std::shared_ptr<detail::JumpTables>& base, std::size_t n1,
                                const JumpSetup& js) {
    auto t = std::make_shared<detail::JumpTables>(*base);
    t->n1 = n1;
    t->logI = t->logJ[n1];
    t->log_c1 = std::log(0.5 * t->C) - t->logI;
    t->f.assign(t->N + 1, 0.0);
    for (std::size_t i = 0; i < t->N; ++i) t->f[i + 1] = t->local(i, t->p).f;

    ConcaveDistanceFn fn;
    fn.kind = FnKind::Jump;
    fn.grid.resize(t->N);
    fn.values.resize(t->N);
    fn.first_deriv.resize(t->N);
    fn.second_deriv.resize(t->N);
    const double logC = std::log(t->C);
    for (std::size_t i = 1; i <= t->N; ++i) {
        const double g = t->g_node(i);
        fn.grid[i - 1] = i * t->p;
        fn.values[i - 1] = t->f[i];
        fn.first_deriv[i - 1] = std::exp(-t->H[i]) * g;
        double lead = t->hbar[i] > 0.0 ? std::log(t->hbar[i]) - logC - t->H[i] + std::log(g) : -kInf;
        if (i < n1) lead = log_add_exp(lead, t->log_c1 - logC + std::log(t->Phi[i + t->w]));
        fn.second_deriv[i - 1] = -std::exp(lead);
    }
    fn.tail_slope = 0.5 * std::exp(-t->H[t->N]);
    fn.tail_intercept = t->f[t->N] - fn.tail_slope * t->N * t->p;
    fn.log_a1 = std::log(0.5) - t->H[t->N];
    fn.a1 = std::exp(fn.log_a1);
    fn.a2 = 1.0;
    auto& k = fn.constants;
    k.log_c1 = t->log_c1;
    k.c1 = std::exp(t->log_c1);
    k.C_eps = t->C;
    k.eps = js.eps;
    k.delta = js.delta;
    k.M = js.M;
    k.gamma = t->gamma;
    k.jump_R0 = js.r_star;
    k.R1 = n1 * t->p;
    k.log_phi_inf = -t->H[t->N];
    fn.jump = std::move(t);
    return fn;
}

}  // namespace

ConcaveDistanceFn build_f1_jump(const Curvature& kappa, const RadialLevyMeasure& measure, double gamma,
                                const JumpOptions& opt) {
    if (!d2_holds(kappa)) throw Error(ErrorCode::AssumptionViolated, "r kappa(r) does not vanish at 0");
    check_L5(measure, opt.lambda_cap);
    find_R0(kappa);  // D1 gate
    const LocalBound K{kappa};

    std::vector<FeasibilityStep> local_log;
    std::vector<FeasibilityStep>& log = opt.log ? *opt.log : local_log;
    std::vector<JumpSetup> feasible;
    const int k_lo = opt.k_override ? *opt.k_override : 0;
    const int k_hi = opt.k_override ? *opt.k_override : 40;
    for (int k = k_lo; k <= k_hi; ++k) {
        FeasibilityStep st;
        st.k = k;
        st.delta = st.eps = std::ldexp(1.0, -k);
        st.C_eps = compute_c_eps(measure, st.eps);
        if (st.C_eps > 0.0) {
            if (auto M = feasible_M(st.delta, st.eps, st.C_eps, gamma, K)) {
                st.M = *M;
                st.feasible = true;
            }
        }
        log.push_back(st);
        if (st.feasible) {
            feasible.push_back({st.delta, st.eps, st.C_eps, st.M, 0.0});
            if (!opt.scan || static_cast<int>(feasible.size()) > opt.scan_extra) break;
        }
    }
    if (feasible.empty()) {
        std::ostringstream os;
        os << "no feasible (delta, eps, M) on delta = eps = 2^-k, k = " << k_lo << ".." << k_hi << "; explored:";
        for (const auto& s : log) os << " [k=" << s.k << " C_eps=" << s.C_eps << "]";
        throw Error(ErrorCode::FeasibilitySearchFailed, os.str());
    }

    std::optional<ConcaveDistanceFn> best;
    for (JumpSetup js : feasible) {
        const double M = js.M;
        js.r_star = last_negative_crossing(
            [&](double r) { return r * kappa(r) - 2.0 * gamma - 2.0 * M; }, 1e4, "h");
        const double p = js.eps / opt.pitch_divisor;
        auto node_of = [p](double r) { return static_cast<std::size_t>(std::ceil(r / p - 1e-9)); };
        CertifyParams cp;
        cp.tol = opt.certify_tol;

        double cover = js.r_star;
        auto base = jump_base(kappa, js, gamma, cover, opt);
        auto attempt = [&](std::size_t n1) {
            const double need = n1 * p;
            if (need + 2.0 * js.eps > base->N * p) {
                cover = std::max(need, 2.0 * cover);
                base = jump_base(kappa, js, gamma, cover, opt);
            }
            ConcaveDistanceFn fn = jump_finalize(base, n1, js);
            const bool ok = certify(fn, FnKind::Jump, kappa, cp).passed;
            return std::make_pair(ok, std::move(fn));
        };

        std::size_t lo_fail = 0;
        std::size_t n1 = std::max<std::size_t>(node_of(js.r_star), static_cast<std::size_t>(2 * opt.pitch_divisor + 1));
        std::optional<ConcaveDistanceFn> found;
        for (int k = 0; k <= 64; ++k) {
            const std::size_t cand = std::max(n1, node_of(n1 * p * std::pow(2.0, k / 16.0)));
            auto [ok, fn] = attempt(cand);
            if (ok) {
                n1 = cand;
                found = std::move(fn);
                break;
            }
            lo_fail = cand;
        }
        if (!found) continue;
        if (lo_fail > 0) {
            std::size_t lo = lo_fail, hi = n1;
            while (hi - lo > 1) {
                const std::size_t mid = lo + (hi - lo) / 2;
                auto [ok, fn] = attempt(mid);
                if (ok) {
                    hi = mid;
                    found = std::move(fn);
                } else {
                    lo = mid;
                }
            }
        }
        if (!best || found->constants.log_c1 > best->constants.log_c1) best = std::move(found);
    }
    if (!best) throw Error(ErrorCode::FeasibilitySearchFailed, "feasible tuples found but no R1 certified");
    return std::move(*best);
}

// ---------------------------------------------------------------------------
// Evaluation

double ConcaveDistanceFn::operator()(double r) const {
    if (r <= 0.0) return 0.0;
    if (kind == FnKind::Brownian && brownian) {
        const auto& t = *brownian;
        if (r >= t.r.back()) return tail_intercept + tail_slope * r;
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(t.r.begin(), t.r.end(), r) - t.r.begin()) - 1;
        const double h = t.r[i + 1] - t.r[i];
        return hermite((r - t.r[i]) / h, h, t.f[i], t.f[i + 1], t.fp[i], t.fp[i + 1]);
    }
    if (kind == FnKind::Jump && jump) {
        const auto& t = *jump;
        const double x = r / t.p;
        if (x >= static_cast<double>(t.N)) return tail_intercept + tail_slope * r;
        const std::size_t i = static_cast<std::size_t>(x);
        const double g0 = t.g_node(i), g1 = t.g_node(i + 1);
        return hermite(x - i, t.p, t.f[i], t.f[i + 1], std::exp(-t.H[i]) * g0, std::exp(-t.H[i + 1]) * g1);
    }
    return 0.0;
}

double ConcaveDistanceFn::derivative(double r) const {
    if (r < 0.0) return 0.0;
    if (kind == FnKind::Brownian && brownian) {
        const auto& t = *brownian;
        if (r >= t.r.back()) return tail_slope;
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(t.r.begin(), t.r.end(), r) - t.r.begin()) - 1;
        const double h = t.r[i + 1] - t.r[i];
        return hermite_slope((r - t.r[i]) / h, h, t.f[i], t.f[i + 1], t.fp[i], t.fp[i + 1]);
    }
    if (kind == FnKind::Jump && jump) {
        const auto& t = *jump;
        const double x = r / t.p;
        if (x >= static_cast<double>(t.N)) return tail_slope;
        const std::size_t i = static_cast<std::size_t>(x);
        return hermite_slope(x - i, t.p, t.f[i], t.f[i + 1], std::exp(-t.H[i]) * t.g_node(i),
                             std::exp(-t.H[i + 1]) * t.g_node(i + 1));
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Certificates

namespace {

Certificate certify_brownian(const ConcaveDistanceFn& fn, const Curvature& kappa, const CertifyParams& params) {
    const auto& t = *fn.brownian;
    Certificate cert;
    cert.inequality_id = "2f'' - r kappa f' + c alpha f <= 0";
    cert.constants_used = fn.constants;
    const double c_used = t.c * params.rate_scale;
    cert.constants_used.c = c_used;

    struct Point {
        double r;
        std::size_t node;  // index into tables, or npos
    };
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<Point> pts;
    for (int k = 0; k < 40; ++k) pts.push_back({1e-12 * std::pow(1e4, k / 40.0), npos});
    const int sub = std::max(1, params.refine);
    for (std::size_t i = 1; i < t.r.size(); ++i) {
        for (int j = 1; j < sub; ++j) {
            pts.push_back({t.r[i - 1] + (t.r[i] - t.r[i - 1]) * j / sub, npos});
        }
        pts.push_back({t.r[i], i});
    }
    std::vector<double> res(pts.size());
    const double a = t.alpha;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(pts.size()); ++q) {
        const Point& pt = pts[q];
        double f, fp, fl, fr;
        if (pt.node != npos) {
            f = t.f[pt.node];
            fp = t.fp[pt.node];
            fl = t.fpp[pt.node];
            fr = t.fpp_right[pt.node];
        } else {
            const auto loc = t.local(pt.r, t.state_at(pt.r));
            f = loc.f;
            fp = loc.fp;
            fl = loc.fpp_left;
            fr = loc.fpp_right;
        }
        const double common = -pt.r * kappa(pt.r) * fp + c_used * a * f;
        res[q] = std::max(2.0 * fl, 2.0 * fr) + common;
    }
    cert.grid.reserve(pts.size());
    for (std::size_t q = 0; q < pts.size(); ++q) {
        cert.grid.push_back(pts[q].r);
        if (res[q] > cert.max_residual || std::isnan(res[q])) {
            cert.max_residual = std::isnan(res[q]) ? kInf : res[q];
            cert.argmax_r = pts[q].r;
        }
    }
    return cert;
}

Certificate certify_jump(const ConcaveDistanceFn& fn, const Curvature& kappa, const CertifyParams& params) {
    const auto& t = *fn.jump;
    Certificate cert;
    cert.inequality_id = "-f1' kappa r + 2 f1' gamma + C_eps fhat_eps + c1 f1 <= 0";
    cert.constants_used = fn.constants;
    const double log_c1 = t.log_c1 + std::log(params.rate_scale);
    cert.constants_used.log_c1 = log_c1;
    cert.constants_used.c1 = std::exp(log_c1);
    const std::size_t w = static_cast<std::size_t>(t.w);
    const std::size_t cells = t.N + t.ext;
    const double logC = std::log(t.C);

    // Upper bound of f1'' on each cell, as -exp(L[c]).
    std::vector<double> L(cells, -kInf);
    for (std::size_t c = 0; c < cells; ++c) {
        double v = -kInf;
        if (t.hbar[c] > 0.0) {
            const double g = c + 1 <= t.N ? t.g_node(c + 1) : 0.5;
            v = std::log(t.hbar[c]) - logC - t.H[c + 1] + std::log(g);
        }
        if (c < t.n1) v = log_add_exp(v, t.log_c1 - logC + std::log(t.Phi[c + w]));
        L[c] = v;
    }
    auto window_min = [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
        double m = kInf;
        for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(lo, 0); c <= hi; ++c) {
            m = std::min(m, c < static_cast<std::ptrdiff_t>(cells) ? L[c] : -kInf);
        }
        return m;
    };

    struct Point {
        std::size_t i;
        double s;
    };
    std::vector<Point> pts;
    const int sub = 2 * std::max(1, params.refine);
    for (int k = 0; k < 40; ++k) {
        const double r = 1e-12 * std::pow(0.5 * t.p / 1e-12, k / 40.0);
        pts.push_back({0, r});
    }
    for (std::size_t i = 0; i < t.N; ++i) {
        for (int j = 1; j < sub; ++j) pts.push_back({i, t.p * j / sub});
        pts.push_back({i + 1, 0.0});
    }
    const std::size_t n_table = pts.size();
    const double r_end = t.N * t.p;
    const double r_max = 4.0 * std::max(fn.constants.jump_R0, fn.constants.R1);
    for (int k = 1; k <= 2000 && r_max > r_end; ++k) pts.push_back({t.N, (r_max - r_end) * k / 2000.0});

    std::vector<double> res(pts.size());
    const double log_f_scale_end = log_c1 + t.H[t.N];
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(pts.size()); ++q) {
        const Point pt = pts[q];
        const double r = pt.i * t.p + pt.s;
        double Hr, g, f;
        double mL;
        if (static_cast<std::size_t>(q) >= n_table || pt.i >= t.N) {
            Hr = t.H[t.N];
            g = 0.5;
            f = t.f[t.N] + 0.5 * std::exp(-t.H[t.N]) * pt.s;
            const std::ptrdiff_t hi_cell = static_cast<std::ptrdiff_t>(std::floor(r / t.p));
            const std::ptrdiff_t lo_cell = static_cast<std::ptrdiff_t>(std::floor((r - t.eps) / t.p));
            mL = window_min(lo_cell, hi_cell);
            const double term = f > 0.0 ? std::exp(log_f_scale_end + std::log(f)) : 0.0;
            const double fhat = std::isfinite(mL) ? -std::exp(mL + Hr) : 0.0;
            res[q] = g * (2.0 * t.gamma - r * kappa(r)) + t.C * fhat + term;
            continue;
        }
        if (pt.s == 0.0) {
            Hr = t.H[pt.i];
            g = t.g_node(pt.i);
            f = t.f[pt.i];
        } else {
            const auto loc = t.local(pt.i, pt.s);
            Hr = loc.H;
            g = loc.g;
            f = loc.f;
        }
        const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(pt.i);
        const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(w);
        const bool above = (pt.i > w) || (pt.i == w && pt.s > 0.0);
        const std::ptrdiff_t extra = pt.s > 0.0 ? 1 : 0;
        if (above) mL = window_min(i - W, i - 1 + extra);
        else mL = window_min(i, i + W - 1 + extra);
        const double fhat = std::isfinite(mL) ? -std::exp(mL + Hr) : 0.0;
        const double term = f > 0.0 ? std::exp(log_c1 + Hr + std::log(f)) : 0.0;
        res[q] = g * (2.0 * t.gamma - r * kappa(r)) + t.C * fhat + term;
    }
    cert.grid.resize(pts.size());
    for (std::size_t q = 0; q < pts.size(); ++q) {
        const double r = pts[q].i * t.p + pts[q].s;
        cert.grid[q] = r;
        const double v = std::isnan(res[q]) ? kInf : res[q];
        if (v > cert.max_residual) {
            cert.max_residual = v;
            cert.argmax_r = r;
        }
    }
    return cert;
}

}  // namespace

Certificate certify(const ConcaveDistanceFn& fn, FnKind kind, const Curvature& kappa, const CertifyParams& params) {
    if (fn.kind != kind) throw Error(ErrorCode::InvalidArgument, "certify: kind does not match the function");
    Certificate cert;
    if (kind == FnKind::Brownian) {
        if (!fn.brownian) throw Error(ErrorCode::InvalidArgument, "certify: function has no Brownian tables");
        cert = certify_brownian(fn, kappa, params);
    } else {
        if (!fn.jump) throw Error(ErrorCode::InvalidArgument, "certify: function has no jump tables");
        cert = certify_jump(fn, kappa, params);
    }
    cert.passed = cert.max_residual <= params.tol;
    cert.grid_hash = hash_doubles(cert.grid);
    return cert;
}

}  // namespace jdc
