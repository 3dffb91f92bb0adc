#include "jdc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include <omp.h>

#include "jdc/errors.hpp"

namespace jdc {

DecayFit fit_decay(const EnsembleResult& ens, const std::function<double(double)>& phi, double t_lo, double t_hi,
                   int batches, std::size_t min_alive) {
    const std::size_t np = ens.n_paths, nt = ens.times.size();
    if (np < 100) throw Error(ErrorCode::InvalidArgument, "fit_decay needs at least 100 paths");
    if (nt == 0 || t_lo > ens.times.back()) throw Error(ErrorCode::InvalidArgument, "fit window outside the horizon");
    DecayFit fit;
    fit.n_paths = np;
    const std::size_t nb = static_cast<std::size_t>(std::max(2, batches));
    std::vector<double> col(np);
    std::vector<std::size_t> window;
    std::vector<std::vector<double>> batch_means;  // per window index
    for (std::size_t k = 0; k < nt; ++k) {
        std::size_t alive = 0;
        for (std::size_t i = 0; i < np; ++i) {
            const double z = ens.dist_at(i, k);
            col[i] = phi ? phi(z) : z;
            alive += col[i] > 0.0 ? 1 : 0;
        }
        const MeanEstimate m = batch_mean(col, batches);
        fit.times.push_back(ens.times[k]);
        fit.means.push_back(m.mean);
        fit.stderrs.push_back(m.stderr);
        const double t = ens.times[k];
        if (t < t_lo || t > t_hi) continue;
        std::vector<double> bm(nb);
        bool positive = true;
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t lo = b * np / nb, hi = (b + 1) * np / nb;
            bm[b] = pairwise_sum(std::span<const double>(col).subspan(lo, hi - lo)) / static_cast<double>(hi - lo);
            positive = positive && bm[b] > 0.0;
        }
        const bool usable = alive >= min_alive && positive && m.mean > 0.0;
        if (!usable) {
            if (window.empty()) {
                fit.degenerate = true;
                fit.rate = kInf;
                std::ostringstream os;
                os << "mean functional vanishes (only " << alive << " uncoupled paths) by t = " << t;
                fit.note = os.str();
                fit.t_lo = t_lo;
                fit.t_hi = t;
                return fit;
            }
            break;
        }
        if (!window.empty() && batch_means.size() != window.size()) break;
        window.push_back(k);
        batch_means.push_back(std::move(bm));
    }
    if (window.size() < 2) {
        fit.degenerate = true;
        fit.rate = kInf;
        fit.note = "fewer than two usable times in the window";
        return fit;
    }
    fit.t_lo = ens.times[window.front()];
    fit.t_hi = ens.times[window.back()];
    std::vector<double> ts, ls;
    for (std::size_t k : window) {
        ts.push_back(ens.times[k]);
        ls.push_back(std::log(fit.means[k]));
    }
    const LineFit lf = least_squares(ts, ls);
    fit.rate = -lf.slope;
    fit.prefactor = std::exp(lf.intercept);
    std::vector<double> rates(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        std::vector<double> lb;
        for (std::size_t w = 0; w < window.size(); ++w) lb.push_back(std::log(batch_means[w][b]));
        rates[b] = -least_squares(ts, lb).slope;
    }
    const double mr = pairwise_sum(rates) / static_cast<double>(nb);
    double ss = 0.0;
    for (double r : rates) ss += (r - mr) * (r - mr);
    fit.stderr_rate = std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
    if (fit.t_hi < std::min(t_hi, ens.times.back())) {
        std::ostringstream os;
        os << "window cut at t = " << fit.t_hi << " (fewer than " << min_alive << " uncoupled paths after)";
        fit.note = os.str();
    }
    return fit;
}

const char* to_string(W1Method m) {
    switch (m) {
        case W1Method::Exact1d: return "exact1d";
        case W1Method::Assignment: return "assignment";
        case W1Method::Sliced: return "sliced";
    }
    return "?";
}

namespace {

// int |F_a - F_b| for two 1-D samples.
double w1_sorted(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    if (a.size() == b.size()) {
        std::vector<double> d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
        return pairwise_sum(d) / na;
    }
    std::size_t i = 0, j = 0;
    double prev = std::min(a.front(), b.front()), s = 0.0;
    while (i < a.size() || j < b.size()) {
        const double next = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        s += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
        prev = next;
        if (j >= b.size() || (i < a.size() && a[i] <= b[j])) ++i;
        else ++j;
    }
    return s;
}

double euclid(std::span<const double> a, std::size_t i, std::span<const double> b, std::size_t j, int d) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
        const double t = a[i * d + c] - b[j * d + c];
        s += t * t;
    }
    return std::sqrt(s);
}

}  // namespace

std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> col(n);
    for (std::size_t j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
    return col;
}

W1Estimate empirical_w1(std::span<const double> a, std::span<const double> b, int dim, std::uint64_t projection_seed) {
    if (dim < 1 || a.size() % dim || b.size() % dim) throw Error(ErrorCode::SizeMismatch, "samples must hold whole points");
    const std::size_t na = a.size() / dim, nb = b.size() / dim;
    if (na == 0 || nb == 0) throw Error(ErrorCode::SizeMismatch, "empty sample");
    W1Estimate est;
    est.n = std::max(na, nb);
    if (dim == 1) {
        est.method = W1Method::Exact1d;
        est.value = w1_sorted({a.begin(), a.end()}, {b.begin(), b.end()});
        return est;
    }
    if (na <= 512 && nb <= 512) {
        if (na != nb) throw Error(ErrorCode::SizeMismatch, "assignment W1 needs equal sample counts");
        std::vector<double> cost(na * na);
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < na; ++j) cost[i * na + j] = euclid(a, i, b, j, dim);
        const auto col = hungarian(cost, na);
        std::vector<double> c(na);
        for (std::size_t i = 0; i < na; ++i) c[i] = cost[i * na + col[i]];
        est.method = W1Method::Assignment;
        est.value = pairwise_sum(c) / static_cast<double>(na);
        return est;
    }
    Rng rng = make_stream(projection_seed, 0);
    std::normal_distribution<double> normal;
    constexpr int projections = 64;
    std::vector<double> vals(projections), dir(dim), pa(na), pb(nb);
    for (int p = 0; p < projections; ++p) {
        double nn = 0.0;
        for (double& x : dir) {
            x = normal(rng);
            nn += x * x;
        }
        nn = std::sqrt(nn);
        for (double& x : dir) x /= nn;
        for (std::size_t i = 0; i < na; ++i) {
            double s = 0.0;
            for (int c = 0; c < dim; ++c) s += a[i * dim + c] * dir[c];
            pa[i] = s;
        }
        for (std::size_t i = 0; i < nb; ++i) {
            double s = 0.0;
            for (int c = 0; c < dim; ++c) s += b[i * dim + c] * dir[c];
            pb[i] = s;
        }
        vals[p] = w1_sorted(pa, pb);
    }
    est.method = W1Method::Sliced;
    est.value = pairwise_sum(vals) / projections;
    est.bias_note = "sliced W1 over 64 random directions; biased low relative to W1";
    return est;
}

W1Report w1_contractivity_check(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> mu,
                                std::span<const double> eta, double T, double dt, const EnsembleOptions& opt,
                                double C_tilde, double c_tilde) {
    const int d = model.dim;
    if (mu.size() != eta.size() || mu.size() % d) throw Error(ErrorCode::SizeMismatch, "clouds must have equal size");
    const std::size_t n = mu.size() / d;
    W1Report rep;
    std::vector<std::size_t> pair(n);
    std::iota(pair.begin(), pair.end(), 0);
    std::vector<std::size_t> order_eta(n);
    std::iota(order_eta.begin(), order_eta.end(), 0);
    if (d == 1) {
        std::vector<std::size_t> order_mu(n);
        std::iota(order_mu.begin(), order_mu.end(), 0);
        std::stable_sort(order_eta.begin(), order_eta.end(), [&](auto i, auto j) { return eta[i] < eta[j]; });
        std::stable_sort(order_mu.begin(), order_mu.end(), [&](auto i, auto j) { return mu[i] < mu[j]; });
        for (std::size_t k = 0; k < n; ++k) pair[order_eta[k]] = order_mu[k];
    } else if (n <= 512) {
        std::vector<double> cost(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = euclid(eta, i, mu, j, d);
        pair = hungarian(cost, n);
    } else {
        rep.note = "clouds paired by index (more than 512 points); ";
    }
    EnsembleOptions o = opt;
    o.n_paths = n;
    o.record_positions = true;
    o.x_starts.assign(eta.begin(), eta.end());
    o.y_starts.resize(mu.size());
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(mu.begin() + pair[i] * d, d, o.y_starts.begin() + i * d);
    const EnsembleResult ens = run_ensemble(model, scheme, {o.x_starts.data(), static_cast<std::size_t>(d)},
                                            {o.y_starts.data(), static_cast<std::size_t>(d)}, T, dt, o);
    rep.w1_initial = empirical_w1(eta, mu, d).value;
    if (rep.w1_initial == 0.0) rep.note += "identical inputs: ratio reported as 0";
    const std::size_t nt = ens.times.size();
    std::vector<double> xs(n * d), ys(n * d), cost(n);
    rep.passed = true;
    for (std::size_t k = 0; k < nt; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(ens.x_path.begin() + (i * nt + k) * d, d, xs.begin() + i * d);
            std::copy_n(ens.y_path.begin() + (i * nt + k) * d, d, ys.begin() + i * d);
            cost[i] = ens.dist_at(i, k);
        }
        W1Row row;
        row.t = ens.times[k];
        row.w1 = empirical_w1(xs, ys, d).value;
        row.ratio = rep.w1_initial > 0.0 ? row.w1 / rep.w1_initial : 0.0;
        row.bound = C_tilde * std::exp(-c_tilde * row.t);
        row.cost_stderr = batch_mean(cost).stderr;
        row.passed = row.w1 <= row.bound * rep.w1_initial + 3.0 * row.cost_stderr;
        rep.passed = rep.passed && row.passed;
        rep.rows.push_back(row);
    }
    return rep;
}

namespace {

template <class Body>
void parallel_paths(std::size_t n, int workers, Body&& body) {
    const int w = workers > 0 ? workers : omp_get_max_threads();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) num_threads(w)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(jdc_estimator_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

std::vector<double> last_x(const CoupledPath& p) {
    const auto s = p.x_at(p.times.size() - 1);
    return {s.begin(), s.end()};
}

std::vector<double> last_y(const CoupledPath& p) {
    const auto s = p.y_at(p.times.size() - 1);
    return {s.begin(), s.end()};
}

}  // namespace

DifferenceResult malliavin_difference_experiment(const ModelSpec& model, const CouplingScheme& scheme,
                                                 const Functional& f, double t, std::span<const double> u, double T,
                                                 std::span<const double> x0, double C_tilde, double c_tilde,
                                                 const ExperimentOptions& opt) {
    if (!model.jump) throw Error(ErrorCode::InvalidArgument, "difference experiment needs a jump coefficient");
    if (!(t <= T)) throw Error(ErrorCode::InvalidArgument, "need t <= T");
    const std::size_t n = opt.n_paths, d = static_cast<std::size_t>(model.dim);
    std::vector<double> diff(n), dist(n), gnorm(n);
    const CouplingScheme sync;
    PathOptions po;
    po.record_every = std::numeric_limits<std::size_t>::max();
    parallel_paths(n, opt.workers, [&](std::size_t i) {
        Rng r0 = make_stream(opt.seed, i, 0);
        const std::vector<double> xt = last_x(simulate_coupled(model, sync, x0, x0, t, opt.dt, r0, po));
        std::vector<double> g(d), xb(d);
        model.jump->g(xt, u, g);
        double gn = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            xb[c] = xt[c] + g[c];
            gn += g[c] * g[c];
        }
        Rng r1 = make_stream(opt.seed, i, 1);
        const CoupledPath p = simulate_coupled(model, scheme, xb, xt, T - t, opt.dt, r1, po);
        const std::vector<double> xT = last_x(p), yT = last_y(p);
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += (xT[c] - yT[c]) * (xT[c] - yT[c]);
        diff[i] = f(xT) - f(yT);
        dist[i] = std::sqrt(s);
        gnorm[i] = std::sqrt(gn);
    });
    DifferenceResult res;
    const MeanEstimate m = batch_mean(diff);
    res.estimate = m.mean;
    res.stderr = m.stderr;
    res.distance_mean = pairwise_sum(dist) / static_cast<double>(n);
    res.mean_g = pairwise_sum(gnorm) / static_cast<double>(n);
    res.bound = C_tilde * std::exp(-c_tilde * (T - t)) * res.mean_g;
    res.lipschitz_ok = res.estimate <= res.distance_mean * (1.0 + 1e-12) + 1e-300;
    res.passed = res.estimate <= res.bound + 3.0 * res.stderr;
    return res;
}

DirectionalResult malliavin_brownian_experiment(const ModelSpec& model, const Perturbation& h, double h_sup,
                                                const Functional& f, double t, std::span<const double> x0,
                                                double C, double c, const DirectionalOptions& opt) {
    if (!model.diffusion.has_additive()) throw Error(ErrorCode::InvalidArgument, "needs additive Brownian noise");
    if (opt.eps_list.empty()) throw Error(ErrorCode::InvalidArgument, "empty eps list");
    const std::size_t n = opt.n_paths, d = static_cast<std::size_t>(model.dim);
    const std::size_t ne = opt.eps_list.size();
    const Mat& s1 = model.diffusion.sigma1;
    std::vector<std::vector<double>> fd(ne, std::vector<double>(n));
    const CouplingScheme sync;
    for (std::size_t e = 0; e < ne; ++e) {
        const double eps = opt.eps_list[e];
        PathOptions po;
        po.record_every = std::numeric_limits<std::size_t>::max();
        po.h = [&, eps](double s, std::span<const double> x, std::span<double> out) {
            std::vector<double> hv(d);
            h(s, x, hv);
            for (std::size_t r = 0; r < d; ++r) {
                double v = 0.0;
                for (std::size_t k = 0; k < d; ++k) v += s1(r, k) * hv[k];
                out[r] = eps * v;
            }
        };
        parallel_paths(n, opt.workers, [&](std::size_t i) {
            Rng rng = make_stream(opt.seed, i, 0);
            const CoupledPath p = simulate_coupled(model, sync, x0, x0, t, opt.dt, rng, po);
            fd[e][i] = (f(last_x(p)) - f(last_y(p))) / eps;
        });
    }
    DirectionalResult res;
    res.eps = opt.eps_list;
    for (std::size_t e = 0; e < ne; ++e) {
        const MeanEstimate m = batch_mean(fd[e]);
        res.values.push_back(m.mean);
        res.stderrs.push_back(m.stderr);
    }
    auto richardson = [&](std::size_t e) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = 2.0 * fd[e + 1][i] - fd[e][i];
        return r;
    };
    if (ne == 1) {
        res.extrapolated = res.values[0];
        res.stderr = res.stderrs[0];
    } else {
        const std::vector<double> r2 = richardson(ne - 2);
        const MeanEstimate m2 = batch_mean(r2);
        res.extrapolated = m2.mean;
        res.stderr = m2.stderr;
        if (ne >= 3) {
            const std::vector<double> r1 = richardson(ne - 3);
            std::vector<double> gap(n);
            for (std::size_t i = 0; i < n; ++i) gap[i] = r2[i] - r1[i];
            const MeanEstimate mg = batch_mean(gap);
            res.residual = std::abs(mg.mean);
            if (res.residual > opt.abs_tol + opt.rel_tol * std::abs(res.extrapolated) + 3.0 * mg.stderr) {
                std::ostringstream os;
                os << "Richardson levels disagree by " << res.residual << " (stderr " << mg.stderr << ")";
                throw Error(ErrorCode::NonConvergent, os.str());
            }
        }
    }
    res.bound = C * model.diffusion.sigma1_norm() * (-std::expm1(-c * t)) / c * h_sup;
    res.within_bound = std::abs(res.extrapolated) <= res.bound + 3.0 * res.stderr;
    return res;
}

}  // namespace jdc
