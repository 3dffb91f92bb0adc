#include "jdc/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>

#include <omp.h>

#include "jdc/errors.hpp"

namespace jdc {

const char* to_string(SchemeKind k) {
    switch (k) {
        case SchemeKind::Synchronous: return "synchronous";
        case SchemeKind::Reflection: return "reflection";
        case SchemeKind::Mirror: return "mirror";
        case SchemeKind::Mixed: return "mixed";
    }
    return "?";
}

SchemeKind scheme_from_string(const std::string& s) {
    if (s == "synchronous") return SchemeKind::Synchronous;
    if (s == "reflection") return SchemeKind::Reflection;
    if (s == "mirror") return SchemeKind::Mirror;
    if (s == "mixed") return SchemeKind::Mixed;
    throw Error(ErrorCode::ConfigError, "unknown coupling scheme '" + s + "'");
}

const char* to_string(JumpLabel l) {
    switch (l) {
        case JumpLabel::Accepted: return "accepted";
        case JumpLabel::Reflected: return "reflected";
        case JumpLabel::Common: return "common";
    }
    return "?";
}

double default_couple_threshold(double dt) { return std::max(1e-6, 1e-2 * std::sqrt(dt)); }

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
}

void matvec(const Mat& m, std::span<const double> v, std::span<double> out) {
    const int r = static_cast<int>(m.rows()), c = static_cast<int>(m.cols());
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
}

// (I - 2 e e^T) w with e = sigma1^-1 z normalized, written to out.
void reflect_noise(const Mat& sigma1_inv, std::span<const double> z, std::span<const double> w, std::span<double> out) {
    const std::size_t d = z.size();
    std::vector<double> e(d);
    matvec(sigma1_inv, z, e);
    const double n = norm(e);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        e[i] /= n;
        dot += e[i] * w[i];
    }
    for (std::size_t i = 0; i < d; ++i) out[i] = w[i] - 2.0 * dot * e[i];
}

}  // namespace

void step_reflection(std::span<const double> x, std::span<const double> y, std::span<const double> dW,
                     const Mat& sigma1, std::span<double> noise_x, std::span<double> noise_y) {
    const std::size_t d = x.size();
    std::vector<double> z(d), w(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = x[i] - y[i];
    matvec(sigma1, dW, noise_x);
    if (norm(z) == 0.0) {
        std::copy(noise_x.begin(), noise_x.end(), noise_y.begin());
        return;
    }
    const Mat inv = sigma1.inverse();
    reflect_noise(inv, z, dW, w);
    matvec(sigma1, w, noise_y);
}

double mirror_accept_prob(std::span<const double> v, std::span<const double> z, const RadialLevyMeasure& measure) {
    const double qv = measure.truncated_density(v);
    if (!(qv > 0.0)) return 0.0;
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i] + z[i];
    const bool v_in = norm(v) <= 1.0, w_in = norm(w) <= 1.0;
    if (v_in != w_in) return 0.0;
    const double qw = measure.truncated_density(w);
    return std::min(qv, qw) / qv;
}

bool step_mirror(std::span<double> x, std::span<double> y, std::span<const double> v, double u,
                 const RadialLevyMeasure& measure) {
    const std::size_t d = x.size();
    std::vector<double> z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = x[i] - y[i];
    const double rho = mirror_accept_prob(v, z, measure);
    for (std::size_t i = 0; i < d; ++i) x[i] += v[i];
    if (u < rho) {
        std::copy(x.begin(), x.end(), y.begin());
        return true;
    }
    const double n = norm(z);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += z[i] / n * v[i];
    for (std::size_t i = 0; i < d; ++i) y[i] += v[i] - 2.0 * dot * z[i] / n;
    return false;
}

double mixed_lambda(double r, double delta) {
    if (r <= 0.5 * delta) return 0.0;
    if (r >= delta) return 1.0;
    return std::sin(0.5 * std::numbers::pi * (r - 0.5 * delta) / (0.5 * delta));
}

void step_mixed(std::span<const double> x, std::span<const double> y, std::span<const double> dW1,
                std::span<const double> dW2, double delta, const Mat& sigma1, std::span<double> noise_x,
                std::span<double> noise_y) {
    const std::size_t d = x.size();
    std::vector<double> z(d), rw(d), wx(d), wy(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = x[i] - y[i];
    const double lam = mixed_lambda(norm(z), delta);
    const double pi = std::sqrt(std::max(0.0, 1.0 - lam * lam));
    if (lam > 0.0) reflect_noise(sigma1.inverse(), z, dW1, rw);
    for (std::size_t i = 0; i < d; ++i) {
        wx[i] = lam * dW1[i] + pi * dW2[i];
        wy[i] = (lam > 0.0 ? lam * rw[i] : 0.0) + pi * dW2[i];
    }
    matvec(sigma1, wx, noise_x);
    matvec(sigma1, wy, noise_y);
}

namespace {

// Euler step machinery for one path; owns its distributions and buffers.
class PathKernel {
public:
    PathKernel(const ModelSpec& m, const CouplingScheme& s, double dt, const PathOptions& opt)
        : m_(m), s_(s), dt_(dt), sqdt_(std::sqrt(dt)), opt_(opt), d_(m.dim) {
        additive_ = m.diffusion.has_additive();
        if (additive_) {
            sigma1_ = m.diffusion.sigma1;
            sigma1_inv_ = sigma1_.inverse();
        }
        eps_couple_ = s.couple_threshold > 0.0 ? s.couple_threshold : default_couple_threshold(dt);
        if (m.levy) levy_count_ = std::poisson_distribution<long>(m.levy->intensity() * dt);
        if (m.jump) jump_count_ = std::poisson_distribution<long>(m.jump->intensity.total_mass() * dt);
        const std::size_t d = static_cast<std::size_t>(d_);
        bx_.resize(d);
        by_.resize(d);
        hx_.resize(d);
        dw1_.resize(d);
        dw2_.resize(d);
        nx_.resize(d);
        ny_.resize(d);
        z_.resize(d);
        v_.resize(d);
        gx_.resize(d);
        gy_.resize(d);
        xn_.resize(d);
        yn_.resize(d);
        if (m.jump) u_.resize(static_cast<std::size_t>(m.jump->intensity.dim()));
    }

    // One step from time t. Returns true when the pair glues during this step.
    bool step(std::vector<double>& x, std::vector<double>& y, double t, bool glued, Rng& rng, std::size_t k,
              CoupledPath* log) {
        const std::size_t d = static_cast<std::size_t>(d_);
        const bool perturbed = static_cast<bool>(opt_.h);
        m_.drift.b(x, bx_);
        if (perturbed) {
            opt_.h(t, x, hx_);
            for (std::size_t i = 0; i < d; ++i) bx_[i] += hx_[i];
        }
        if (!glued) m_.drift.b(y, by_);
        for (std::size_t i = 0; i < d; ++i) {
            xn_[i] = x[i] + bx_[i] * dt_;
            yn_[i] = glued ? 0.0 : y[i] + by_[i] * dt_;
        }
        if (additive_) {
            for (std::size_t i = 0; i < d; ++i) dw1_[i] = sqdt_ * normal_(rng);
            if (s_.variant == SchemeKind::Mixed)
                for (std::size_t i = 0; i < d; ++i) dw2_[i] = sqdt_ * normal_(rng);
            if (glued) {
                matvec(sigma1_, dw1_, nx_);
            } else {
                for (std::size_t i = 0; i < d; ++i) z_[i] = x[i] - y[i];
                switch (s_.variant) {
                    case SchemeKind::Synchronous:
                    case SchemeKind::Mirror:
                        matvec(sigma1_, dw1_, nx_);
                        std::copy(nx_.begin(), nx_.end(), ny_.begin());
                        break;
                    case SchemeKind::Reflection:
                        matvec(sigma1_, dw1_, nx_);
                        if (norm(z_) == 0.0) {
                            std::copy(nx_.begin(), nx_.end(), ny_.begin());
                        } else {
                            reflect_noise(sigma1_inv_, z_, dw1_, v_);
                            matvec(sigma1_, v_, ny_);
                        }
                        break;
                    case SchemeKind::Mixed: {
                        const double lam = mixed_lambda(norm(z_), s_.mixed_delta);
                        const double pi = std::sqrt(std::max(0.0, 1.0 - lam * lam));
                        if (lam > 0.0) reflect_noise(sigma1_inv_, z_, dw1_, v_);
                        for (std::size_t i = 0; i < d; ++i) {
                            gx_[i] = lam * dw1_[i] + pi * dw2_[i];
                            gy_[i] = (lam > 0.0 ? lam * v_[i] : 0.0) + pi * dw2_[i];
                        }
                        matvec(sigma1_, gx_, nx_);
                        matvec(sigma1_, gy_, ny_);
                        break;
                    }
                }
            }
            for (std::size_t i = 0; i < d; ++i) {
                xn_[i] += nx_[i];
                if (!glued) yn_[i] += ny_[i];
            }
        }
        if (m_.diffusion.has_multiplicative()) {
            const Mat sx = m_.diffusion.sigma(x);
            const std::size_t mcols = static_cast<std::size_t>(sx.cols());
            db_.resize(mcols);
            for (double& b : db_) b = sqdt_ * normal_(rng);
            matvec(sx, db_, nx_);
            for (std::size_t i = 0; i < d; ++i) xn_[i] += nx_[i];
            if (!glued) {
                const Mat sy = m_.diffusion.sigma(y);
                matvec(sy, db_, ny_);
                for (std::size_t i = 0; i < d; ++i) yn_[i] += ny_[i];
            }
        }
        if (m_.jump) {
            const auto& j = *m_.jump;
            for (std::size_t c = 0; c < d; ++c) {
                xn_[c] -= dt_ * j.intensity.integrate([&](std::span<const double> u) {
                    j.g(x, u, gx_);
                    return gx_[c];
                });
                if (!glued) {
                    yn_[c] -= dt_ * j.intensity.integrate([&](std::span<const double> u) {
                        j.g(y, u, gy_);
                        return gy_[c];
                    });
                }
            }
            const long n = j.intensity.total_mass() > 0.0 ? jump_count_(rng) : 0;
            for (long e = 0; e < n; ++e) {
                j.intensity.sample(rng, u_);
                j.g(x, u_, gx_);
                for (std::size_t i = 0; i < d; ++i) xn_[i] += gx_[i];
                if (!glued) {
                    j.g(y, u_, gy_);
                    for (std::size_t i = 0; i < d; ++i) yn_[i] += gy_[i];
                }
            }
        }
        bool glue_now = false;
        if (m_.levy) {
            const long n = m_.levy->intensity() > 0.0 ? levy_count_(rng) : 0;
            for (long e = 0; e < n; ++e) {
                m_.levy->sample_jump(rng, v_);
                const bool active = !glued && !glue_now;
                if (active && s_.variant == SchemeKind::Mirror && !perturbed) {
                    for (std::size_t i = 0; i < d; ++i) z_[i] = xn_[i] - yn_[i];
                    const double u = uniform01(rng);
                    bool accepted;
                    if (norm(z_) == 0.0) {
                        for (std::size_t i = 0; i < d; ++i) xn_[i] += v_[i];
                        yn_ = xn_;
                        accepted = true;
                    } else {
                        accepted = step_mirror(xn_, yn_, v_, u, *m_.levy);
                    }
                    if (accepted) {
                        glue_now = true;
                        ++accepted_;
                    } else {
                        ++rejected_;
                    }
                    if (log && opt_.record_jumps) {
                        log->jump_log.push_back({t + dt_, k + 1, {v_.begin(), v_.end()},
                                                 accepted ? JumpLabel::Accepted : JumpLabel::Reflected});
                    }
                } else {
                    for (std::size_t i = 0; i < d; ++i) {
                        xn_[i] += v_[i];
                        if (active) yn_[i] += v_[i];
                    }
                    if (log && opt_.record_jumps)
                        log->jump_log.push_back({t + dt_, k + 1, {v_.begin(), v_.end()}, JumpLabel::Common});
                }
            }
        }
        if (!glued && !glue_now && !perturbed) {
            for (std::size_t i = 0; i < d; ++i) z_[i] = xn_[i] - yn_[i];
            const double r = norm(z_);
            if (r == 0.0) {
                glue_now = true;
            } else if (s_.variant == SchemeKind::Reflection || s_.variant == SchemeKind::Mixed) {
                // Below the threshold, or z turned through the origin within the step.
                double turn = 0.0;
                for (std::size_t i = 0; i < d; ++i) turn += z_[i] * (x[i] - y[i]);
                if (r <= eps_couple_ || turn <= 0.0) glue_now = true;
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(xn_[i]) || std::abs(xn_[i]) > opt_.path_cap ||
                (!glued && !glue_now && (!std::isfinite(yn_[i]) || std::abs(yn_[i]) > opt_.path_cap))) {
                std::ostringstream os;
                os << "path left the cap " << opt_.path_cap << " at t = " << t + dt_;
                throw Error(ErrorCode::PathExploded, os.str());
            }
        }
        std::copy(xn_.begin(), xn_.end(), x.begin());
        if (glued || glue_now) std::copy(xn_.begin(), xn_.end(), y.begin());
        else std::copy(yn_.begin(), yn_.end(), y.begin());
        return glue_now;
    }

    std::size_t accepted() const { return accepted_; }
    std::size_t rejected() const { return rejected_; }

private:
    const ModelSpec& m_;
    const CouplingScheme& s_;
    double dt_, sqdt_;
    const PathOptions& opt_;
    int d_;
    bool additive_ = false;
    Mat sigma1_, sigma1_inv_;
    double eps_couple_ = 0.0;
    std::normal_distribution<double> normal_;
    std::poisson_distribution<long> levy_count_, jump_count_;
    std::vector<double> bx_, by_, hx_, dw1_, dw2_, nx_, ny_, z_, v_, gx_, gy_, xn_, yn_, u_, db_;
    std::size_t accepted_ = 0, rejected_ = 0;
};

void check_scheme(const ModelSpec& model, const CouplingScheme& scheme) {
    switch (scheme.variant) {
        case SchemeKind::Mirror:
            if (!model.levy) throw Error(ErrorCode::SchemeIncompatible, "mirror coupling needs a Levy measure");
            break;
        case SchemeKind::Reflection:
            if (!model.diffusion.has_additive())
                throw Error(ErrorCode::SchemeIncompatible, "reflection coupling needs det sigma1 > 0");
            break;
        case SchemeKind::Mixed:
            if (!model.diffusion.has_additive())
                throw Error(ErrorCode::SchemeIncompatible, "mixed coupling needs det sigma1 > 0");
            if (!(scheme.mixed_delta > 0.0))
                throw Error(ErrorCode::SchemeIncompatible, "mixed coupling needs delta > 0");
            break;
        case SchemeKind::Synchronous: break;
    }
    if (!model.drift.b) throw Error(ErrorCode::InvalidArgument, "model has no drift");
}

std::size_t step_count(double T, double dt) {
    if (!(dt > 0.0) || !(T >= 0.0)) throw Error(ErrorCode::InvalidArgument, "need dt > 0 and T >= 0");
    return static_cast<std::size_t>(std::llround(T / dt));
}

template <class OnRecord>
void run_path(const ModelSpec& model, const CouplingScheme& scheme, std::vector<double>& x, std::vector<double>& y,
              std::size_t n, double dt, Rng& rng, const PathOptions& opt, CoupledPath* log, OnRecord&& on_record,
              double& coupling_time, std::size_t& acc, std::size_t& rej) {
    PathKernel kernel(model, scheme, dt, opt);
    bool glued = !opt.h && x == y;
    coupling_time = glued ? 0.0 : kInf;
    on_record(0, x, y);
    for (std::size_t k = 0; k < n; ++k) {
        if (kernel.step(x, y, k * dt, glued, rng, k, log)) {
            glued = true;
            coupling_time = (k + 1) * dt;
        }
        if ((k + 1) % opt.record_every == 0 || k + 1 == n) on_record(k + 1, x, y);
    }
    acc = kernel.accepted();
    rej = kernel.rejected();
}

}  // namespace

CoupledPath simulate_coupled(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> x0,
                             std::span<const double> y0, double T, double dt, Rng& rng, const PathOptions& opt) {
    check_scheme(model, scheme);
    if (static_cast<int>(x0.size()) != model.dim || static_cast<int>(y0.size()) != model.dim)
        throw Error(ErrorCode::SizeMismatch, "initial points must have the model dimension");
    const std::size_t n = step_count(T, dt);
    CoupledPath path;
    path.dim = model.dim;
    std::vector<double> x(x0.begin(), x0.end()), y(y0.begin(), y0.end());
    PathOptions o = opt;
    o.record_every = std::max<std::size_t>(1, opt.record_every);
    auto rec = [&](std::size_t k, const std::vector<double>& xs, const std::vector<double>& ys) {
        path.times.push_back(k * dt);
        path.x.insert(path.x.end(), xs.begin(), xs.end());
        path.y.insert(path.y.end(), ys.begin(), ys.end());
    };
    run_path(model, scheme, x, y, n, dt, rng, o, &path, rec, path.coupling_time, path.accepted, path.rejected);
    path.glued = std::isfinite(path.coupling_time);
    return path;
}

CoupledPath simulate_drift_perturbed(const ModelSpec& model, const Perturbation& h, const CouplingScheme& scheme,
                                     std::span<const double> x0, double T, double dt, Rng& rng,
                                     const PathOptions& opt) {
    if (!h) throw Error(ErrorCode::InvalidArgument, "drift perturbation missing");
    PathOptions o = opt;
    o.h = h;
    return simulate_coupled(model, scheme, x0, x0, T, dt, rng, o);
}

std::size_t EnsembleResult::coupled_by(std::size_t k) const {
    std::size_t c = 0;
    for (double t : coupling_time) c += t <= times[k] ? 1 : 0;
    return c;
}

namespace {

EnsembleResult prepare(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> x0,
                       std::span<const double> y0, double T, double dt, const EnsembleOptions& opt) {
    check_scheme(model, scheme);
    if (static_cast<int>(x0.size()) != model.dim || static_cast<int>(y0.size()) != model.dim)
        throw Error(ErrorCode::SizeMismatch, "initial points must have the model dimension");
    const std::size_t n = step_count(T, dt);
    const std::size_t every = std::max<std::size_t>(1, opt.record_every);
    EnsembleResult res;
    res.dim = model.dim;
    res.n_paths = opt.n_paths;
    for (std::size_t k = 0; k <= n; ++k)
        if (k % every == 0 || k == n) res.times.push_back(k * dt);
    const std::size_t np = opt.n_paths, d = static_cast<std::size_t>(model.dim);
    res.dist.assign(np * res.times.size(), 0.0);
    res.x_start.assign(np * d, 0.0);
    res.y_start.assign(np * d, 0.0);
    res.x_final.assign(np * d, 0.0);
    res.y_final.assign(np * d, 0.0);
    res.coupling_time.assign(np, kInf);
    res.accepted.assign(np, 0);
    res.rejected.assign(np, 0);
    if (!opt.x_starts.empty() || !opt.y_starts.empty()) {
        if (opt.x_starts.size() != np * d || opt.y_starts.size() != np * d)
            throw Error(ErrorCode::SizeMismatch, "per-path starts must hold n_paths x dim values");
    }
    if (opt.record_positions) {
        res.x_path.assign(np * res.times.size() * d, 0.0);
        res.y_path.assign(np * res.times.size() * d, 0.0);
    }
    return res;
}

void one_path(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> x0,
              std::span<const double> y0, double T, double dt, const EnsembleOptions& opt, std::size_t i,
              EnsembleResult& res) {
    const std::size_t d = static_cast<std::size_t>(model.dim);
    const std::size_t n = step_count(T, dt);
    PathOptions po;
    po.record_every = std::max<std::size_t>(1, opt.record_every);
    po.path_cap = opt.path_cap;
    po.h = opt.h;
    std::vector<double> x(x0.begin(), x0.end()), y(y0.begin(), y0.end());
    if (!opt.x_starts.empty()) {
        std::copy_n(opt.x_starts.begin() + i * d, d, x.begin());
        std::copy_n(opt.y_starts.begin() + i * d, d, y.begin());
    }
    if (opt.burn_in > 0.0) {
        const CouplingScheme sync;
        PathOptions bo;
        bo.record_every = std::numeric_limits<std::size_t>::max();
        bo.path_cap = opt.path_cap;
        const std::size_t nb = step_count(opt.burn_in, dt);
        double ct;
        std::size_t a, r;
        auto none = [](std::size_t, const std::vector<double>&, const std::vector<double>&) {};
        Rng r1 = make_stream(opt.seed, i, 1);
        std::vector<double> xx = x;
        run_path(model, sync, x, xx, nb, dt, r1, bo, nullptr, none, ct, a, r);
        Rng r2 = make_stream(opt.seed, i, 2);
        std::vector<double> yy = y;
        run_path(model, sync, y, yy, nb, dt, r2, bo, nullptr, none, ct, a, r);
    }
    std::copy(x.begin(), x.end(), res.x_start.begin() + i * d);
    std::copy(y.begin(), y.end(), res.y_start.begin() + i * d);
    Rng rng = make_stream(opt.seed, i, 0);
    const std::size_t nt = res.times.size();
    std::size_t slot = 0;
    auto rec = [&](std::size_t, const std::vector<double>& xs, const std::vector<double>& ys) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += (xs[c] - ys[c]) * (xs[c] - ys[c]);
        if (opt.record_positions) {
            std::copy(xs.begin(), xs.end(), res.x_path.begin() + (i * nt + slot) * d);
            std::copy(ys.begin(), ys.end(), res.y_path.begin() + (i * nt + slot) * d);
        }
        res.dist[i * nt + slot++] = std::sqrt(s);
    };
    run_path(model, scheme, x, y, n, dt, rng, po, nullptr, rec, res.coupling_time[i], res.accepted[i],
             res.rejected[i]);
    std::copy(x.begin(), x.end(), res.x_final.begin() + i * d);
    std::copy(y.begin(), y.end(), res.y_final.begin() + i * d);
}

}  // namespace

EnsembleResult run_ensemble(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> x0,
                            std::span<const double> y0, double T, double dt, const EnsembleOptions& opt) {
    EnsembleResult res = prepare(model, scheme, x0, y0, T, dt, opt);
    const int workers = opt.workers > 0 ? opt.workers : omp_get_max_threads();
    const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(opt.n_paths);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) num_threads(workers)
    for (std::ptrdiff_t i = 0; i < np; ++i) {
        try {
            one_path(model, scheme, x0, y0, T, dt, opt, static_cast<std::size_t>(i), res);
        } catch (...) {
#pragma omp critical(jdc_ensemble_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return res;
}

EnsembleResult run_ensemble_serial(const ModelSpec& model, const CouplingScheme& scheme,
                                   std::span<const double> x0, std::span<const double> y0, double T, double dt,
                                   const EnsembleOptions& opt) {
    EnsembleResult res = prepare(model, scheme, x0, y0, T, dt, opt);
    for (std::size_t i = 0; i < opt.n_paths; ++i) one_path(model, scheme, x0, y0, T, dt, opt, i, res);
    return res;
}

}  // namespace jdc
