#include "jdc/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "jdc/errors.hpp"
#include "jdc/estimators.hpp"
#include "jdc/lyapunov.hpp"
#include "jdc/stats.hpp"
#include "jdc/transport.hpp"

namespace jdc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

json jnum(double v) {
    if (std::isfinite(v)) return v;
    return num(v);
}

bool wants(const ExperimentConfig& cfg, const std::string& f) {
    return std::find(cfg.formats.begin(), cfg.formats.end(), f) != cfg.formats.end();
}

struct BuiltFn {
    ConcaveDistanceFn fn;
    Certificate cert;
    std::string kappa_variant;
    Curvature kappa;
};

std::string certify_kind(const ExperimentConfig& cfg) {
    std::string kind = cfg.ini.get_or("certify", "kind", "auto");
    if (kind == "auto") kind = (cfg.model.levy && !cfg.model.diffusion.has_additive()) ? "jump" : "brownian";
    if (kind != "brownian" && kind != "jump")
        throw Error(ErrorCode::ConfigError, cfg.ini.source() + ": [certify] kind: expected auto, brownian or jump");
    return kind;
}

BuiltFn build_certified(const ExperimentConfig& cfg, const std::string& kind) {
    BuiltFn b;
    if (kind == "brownian") {
        if (!cfg.model.diffusion.has_additive())
            throw Error(ErrorCode::AssumptionViolated, "Brownian route needs det sigma1 > 0");
        b.kappa = brownian_kappa(cfg.model);
        b.kappa_variant = "brownian: kappa+/s_max^2 - kappa- alpha from the drift profile";
        b.fn = build_f_brownian(b.kappa, cfg.model.diffusion.alpha());
        b.cert = certify(b.fn, FnKind::Brownian, b.kappa);
    } else {
        if (!cfg.model.levy) throw Error(ErrorCode::AssumptionViolated, "jump route needs a Levy measure");
        b.kappa = cfg.model.drift.kappa;
        b.kappa_variant = "jump: drift profile as given";
        JumpOptions jo;
        jo.scan = cfg.ini.get_or("certify", "scan", "false") == "true";
        b.fn = build_f1_jump(b.kappa, *cfg.model.levy, compute_gamma(*cfg.model.levy), jo);
        b.cert = certify(b.fn, FnKind::Jump, b.kappa);
    }
    return b;
}

void put_constants(ResultRecord& rec, const DistanceConstants& k, FnKind kind) {
    if (kind == FnKind::Brownian) {
        rec.metrics["c"] = k.c;
        rec.metrics["C"] = k.C;
        rec.metrics["R0"] = k.R0;
        rec.metrics["R1"] = k.R1;
    } else {
        rec.metrics["log_c1"] = k.log_c1;
        rec.metrics["c1"] = k.c1;
        rec.metrics["C_eps"] = k.C_eps;
        rec.metrics["eps"] = k.eps;
        rec.metrics["delta"] = k.delta;
        rec.metrics["M"] = k.M;
        rec.metrics["R1"] = k.R1;
    }
}

EnsembleOptions ensemble_options(const ExperimentConfig& cfg) {
    EnsembleOptions o;
    o.n_paths = cfg.run.n_paths;
    o.seed = cfg.run.seed;
    o.workers = cfg.run.workers;
    o.record_every = cfg.run.record_every;
    o.burn_in = cfg.run.burn_in;
    return o;
}

double initial_distance(const ExperimentConfig& cfg) {
    double s = 0.0;
    for (std::size_t i = 0; i < cfg.run.x0.size(); ++i) s += std::pow(cfg.run.x0[i] - cfg.run.y0[i], 2);
    return std::sqrt(s);
}

int do_certify(const ExperimentConfig& cfg, ResultRecord& rec, std::ostream& log) {
    const std::string kind = certify_kind(cfg);
    const BuiltFn b = build_certified(cfg, kind);
    put_constants(rec, b.fn.constants, b.fn.kind);
    rec.metrics["max_residual"] = b.cert.max_residual;
    rec.metrics["argmax_r"] = b.cert.argmax_r;
    rec.metrics["grid_points"] = static_cast<double>(b.cert.grid.size());
    rec.metrics["a1"] = b.fn.a1;
    rec.metrics["log_a1"] = b.fn.log_a1;
    rec.notes["inequality"] = b.cert.inequality_id;
    rec.notes["grid_hash"] = hex64(b.cert.grid_hash);
    rec.notes["kappa_variant"] = b.kappa_variant;
    rec.notes["kind"] = kind;
    rec.passed = b.cert.passed;

    log << "certificate  " << b.cert.inequality_id << "\n";
    log << std::left << std::setw(14) << "kind" << kind << "\n";
    for (const auto& [k, v] : rec.metrics) log << std::left << std::setw(14) << k << num(v) << "\n";
    log << std::left << std::setw(14) << "passed" << (b.cert.passed ? "yes" : "no") << "\n";

    if (wants(cfg, "csv")) {
        const std::string path = (fs::path(cfg.out_dir) / "distance_fn.csv").string();
        std::ofstream out(path);
        out << "r,f,f_prime,f_second\n";
        const std::size_t stride = std::max<std::size_t>(1, b.fn.grid.size() / 5000);
        for (std::size_t i = 0; i < b.fn.grid.size(); i += stride) {
            out << num(b.fn.grid[i]) << "," << num(b.fn.values[i]) << "," << num(b.fn.first_deriv[i]) << ","
                << num(b.fn.second_deriv[i]) << "\n";
        }
        rec.artifacts.push_back(path);
    }
    return rec.passed ? kExitOk : kExitFailedCheck;
}

void mean_series(const EnsembleResult& ens, const std::function<double(double)>& phi, std::vector<SeriesRow>& rows,
                 const std::function<double(double)>& bound) {
    std::vector<double> col(ens.n_paths);
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
        for (std::size_t i = 0; i < ens.n_paths; ++i) col[i] = phi ? phi(ens.dist_at(i, k)) : ens.dist_at(i, k);
        const MeanEstimate m = batch_mean(col);
        rows.push_back({ens.times[k], m.mean, m.stderr, bound ? bound(ens.times[k]) : std::nan("")});
    }
}

int do_simulate(const ExperimentConfig& cfg, ResultRecord& rec, std::ostream& log) {
    const auto& r = cfg.run;
    const EnsembleResult ens = run_ensemble(cfg.model, cfg.scheme, r.x0, r.y0, r.T, r.dt, ensemble_options(cfg));
    auto& rows = rec.series["mean_distance"];
    mean_series(ens, {}, rows, {});
    rec.metrics["coupled_fraction"] =
        static_cast<double>(ens.coupled_by(ens.times.size() - 1)) / static_cast<double>(ens.n_paths);
    rec.metrics["mean_distance_T"] = rows.back().value;
    std::size_t acc = 0, rej = 0;
    for (std::size_t i = 0; i < ens.n_paths; ++i) {
        acc += ens.accepted[i];
        rej += ens.rejected[i];
    }
    rec.metrics["accepted_jumps"] = static_cast<double>(acc);
    rec.metrics["rejected_jumps"] = static_cast<double>(rej);
    rec.metrics["couple_threshold"] =
        cfg.scheme.couple_threshold > 0.0 ? cfg.scheme.couple_threshold : default_couple_threshold(r.dt);
    if (ens.n_paths >= 100 && r.T > 0.0) {
        const DecayFit fit = fit_decay(ens, {}, cfg.ini.number_or("contract", "t_lo", std::min(1.0, 0.2 * r.T)),
                                       cfg.ini.number_or("contract", "t_hi", kInf));
        rec.metrics["fit_rate"] = fit.rate;
        rec.metrics["fit_rate_stderr"] = fit.stderr_rate;
        rec.metrics["fit_prefactor"] = fit.prefactor;
        if (!fit.note.empty()) rec.notes["fit"] = fit.note;
    }
    if (wants(cfg, "csv") && r.burn_in <= 0.0) {
        Rng rng = make_stream(r.seed, 0, 0);
        PathOptions po;
        po.record_every = r.record_every;
        const CoupledPath p = simulate_coupled(cfg.model, cfg.scheme, r.x0, r.y0, r.T, r.dt, rng, po);
        const std::string path = (fs::path(cfg.out_dir) / "trace_path0.csv").string();
        std::ofstream out(path);
        out << "t";
        for (int c = 0; c < p.dim; ++c) out << ",x" << c;
        for (int c = 0; c < p.dim; ++c) out << ",y" << c;
        out << ",abs_z\n";
        for (std::size_t k = 0; k < p.times.size(); ++k) {
            out << num(p.times[k]);
            double s = 0.0;
            for (int c = 0; c < p.dim; ++c) out << "," << num(p.x_at(k)[c]);
            for (int c = 0; c < p.dim; ++c) {
                out << "," << num(p.y_at(k)[c]);
                s += std::pow(p.x_at(k)[c] - p.y_at(k)[c], 2);
            }
            out << "," << num(std::sqrt(s)) << "\n";
        }
        rec.artifacts.push_back(path);
    }
    log << "simulate  paths=" << ens.n_paths << " coupled_fraction=" << num(rec.metrics["coupled_fraction"])
        << " E|Z_T|=" << num(rows.back().value) << "\n";
    return kExitOk;
}

int do_contract(const ExperimentConfig& cfg, ResultRecord& rec, std::ostream& log) {
    const auto& r = cfg.run;
    const std::string kind = certify_kind(cfg);
    const BuiltFn b = build_certified(cfg, kind);
    put_constants(rec, b.fn.constants, b.fn.kind);
    rec.notes["kappa_variant"] = b.kappa_variant;
    if (!b.cert.passed) {
        rec.passed = false;
        log << "contract  certificate failed (max residual " << num(b.cert.max_residual) << ")\n";
        return kExitFailedCheck;
    }
    const EnsembleResult ens = run_ensemble(cfg.model, cfg.scheme, r.x0, r.y0, r.T, r.dt, ensemble_options(cfg));
    bool ok = true;
    if (kind == "brownian") {
        const double C = b.fn.constants.C, c = b.fn.constants.c;
        const double z0 = initial_distance(cfg);
        auto& rows = rec.series["mean_distance"];
        mean_series(ens, {}, rows, [&](double t) { return C * std::exp(-c * t) * z0; });
        if (r.burn_in <= 0.0) {
            for (const auto& row : rows) ok = ok && row.value <= row.bound + 3.0 * row.stderr;
        }
        const DecayFit fit = fit_decay(ens, {}, cfg.ini.number_or("contract", "t_lo", std::min(1.0, 0.2 * r.T)),
                                       cfg.ini.number_or("contract", "t_hi", kInf));
        rec.metrics["fit_rate"] = fit.rate;
        rec.metrics["fit_rate_stderr"] = fit.stderr_rate;
        if (!fit.note.empty()) rec.notes["fit"] = fit.note;
        const bool rate_ok = fit.rate >= c - 3.0 * fit.stderr_rate;
        rec.metrics["rate_within_band"] = rate_ok ? 1.0 : 0.0;
        ok = ok && rate_ok;
    } else {
        const ConcaveDistanceFn& f = b.fn;
        const double f0 = f(initial_distance(cfg));
        const double c1 = b.fn.constants.c1;
        auto& rows = rec.series["mean_f1_distance"];
        mean_series(ens, [&](double z) { return f(z); }, rows, [&](double t) { return std::exp(-c1 * t) * f0; });
        if (r.burn_in <= 0.0) {
            for (const auto& row : rows) ok = ok && row.value <= row.bound + 3.0 * row.stderr;
        }
    }
    if (r.burn_in > 0.0) {
        std::vector<double> xs(ens.n_paths), ys(ens.n_paths);
        for (std::size_t i = 0; i < ens.n_paths; ++i) {
            xs[i] = ens.x_final[i * ens.dim];
            ys[i] = ens.y_final[i * ens.dim];
        }
        const KsResult ks = ks_two_sample(xs, ys, 1e-3);
        rec.metrics["ks_statistic"] = ks.statistic;
        rec.metrics["ks_p_value"] = ks.p_value;
        ok = ok && !ks.rejected;
    }
    rec.metrics["coupled_fraction"] =
        static_cast<double>(ens.coupled_by(ens.times.size() - 1)) / static_cast<double>(ens.n_paths);
    rec.passed = ok;
    log << "contract  kind=" << kind << " passed=" << (ok ? "yes" : "no") << "\n";
    return ok ? kExitOk : kExitFailedCheck;
}

int do_transport(const ExperimentConfig& cfg, ResultRecord& rec, std::ostream& log) {
    const auto& ini = cfg.ini;
    const BuiltFn b = build_certified(cfg, "brownian");
    RateConstants k;
    k.C_tilde = k.C = b.fn.constants.C;
    k.c_tilde = k.c = b.fn.constants.c;
    k.sigma_inf = cfg.model.diffusion.sigma_inf;
    k.sigma1_norm = cfg.model.diffusion.sigma1_norm();
    const double T = ini.number_or("transport", "T", cfg.run.T);
    std::function<double(double)> beta, beta_L;
    if (cfg.model.jump) beta = [&](double lam) { return compute_beta(*cfg.model.jump, lam); };
    if (cfg.model.levy) beta_L = [&](double lam) { return compute_beta_L(*cfg.model.levy, lam); };
    const DeviationFunction dev = make_alpha_T(T, k, beta, beta_L);

    EnsembleOptions o = ensemble_options(cfg);
    o.n_paths = static_cast<std::size_t>(ini.integer_or("transport", "n_samples", 100000));
    o.record_every = std::numeric_limits<std::size_t>::max();
    o.burn_in = 0.0;
    const CouplingScheme sync;
    const EnsembleResult ens = run_ensemble(cfg.model, sync, cfg.run.x0, cfg.run.x0, T, cfg.run.dt, o);
    std::vector<double> samples(ens.n_paths);
    for (std::size_t i = 0; i < ens.n_paths; ++i) samples[i] = ens.x_final[i * ens.dim];
    const double mu = pairwise_sum(samples) / static_cast<double>(samples.size());

    const std::vector<double> lams = ini.has("transport", "lambdas") ? ini.numbers("transport", "lambdas")
                                                                     : std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5};
    const std::vector<double> rs = ini.has("transport", "r_grid") ? ini.numbers("transport", "r_grid")
                                                                  : std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5};
    const std::size_t n_block = static_cast<std::size_t>(ini.integer_or("transport", "n_block", 10));
    const MgfReport mgf = mgf_check(samples, dev, lams);
    const TailReport tail = tail_check(samples, mu, dev, rs, n_block);
    for (const auto& row : mgf.rows) rec.series["log_mgf"].push_back({row.lam, row.empirical, row.stderr, row.conjugate});
    for (const auto& row : tail.rows)
        rec.series["block_tail"].push_back({row.r, row.empirical, (row.wilson_hi - row.wilson_lo) / 6.0, row.bound});
    rec.metrics["mgf_passed"] = mgf.passed ? 1.0 : 0.0;
    rec.metrics["tail_passed"] = tail.passed ? 1.0 : 0.0;
    rec.metrics["lambda_max"] = dev.lambda_max;
    rec.metrics["sample_mean"] = mu;
    rec.metrics["C"] = k.C;
    rec.metrics["c"] = k.c;
    rec.notes["deviation"] = to_string(dev.kind);
    rec.notes["mean"] = "tail check centred at the sample mean of all replications";
    if (wants(cfg, "csv")) {
        const std::string path = (fs::path(cfg.out_dir) / "alpha.csv").string();
        std::ofstream out(path);
        out << "r,alpha\n";
        const double rmax = rs.empty() ? 1.0 : *std::max_element(rs.begin(), rs.end());
        for (int i = 0; i <= 50; ++i) {
            const double r = rmax * i / 50.0;
            out << num(r) << "," << num(eval_alpha(dev, r)) << "\n";
        }
        rec.artifacts.push_back(path);
    }
    rec.passed = mgf.passed && tail.passed;
    log << "transport  mgf=" << (mgf.passed ? "pass" : "fail") << " tail=" << (tail.passed ? "pass" : "fail") << "\n";
    return rec.passed ? kExitOk : kExitFailedCheck;
}

int do_malliavin(const ExperimentConfig& cfg, ResultRecord& rec, std::ostream& log) {
    const auto& ini = cfg.ini;
    const BuiltFn b = build_certified(cfg, "brownian");
    const double C = b.fn.constants.C, c = b.fn.constants.c;
    rec.metrics["C"] = C;
    rec.metrics["c"] = c;
    const std::string mode = ini.get_or("malliavin", "mode", "difference");
    const double t = ini.number_or("malliavin", "t", 1.0);
    const Functional f = [](std::span<const double> x) { return x[0]; };
    bool ok = true;
    if (mode == "difference") {
        const std::vector<double> u = ini.has("malliavin", "u") ? ini.numbers("malliavin", "u") : std::vector<double>{1.0};
        const std::vector<double> hs = ini.has("malliavin", "horizons") ? ini.numbers("malliavin", "horizons")
                                                                       : std::vector<double>{0.0, 0.5, 1.0, 2.0, 4.0};
        ExperimentOptions eo;
        eo.n_paths = cfg.run.n_paths;
        eo.seed = cfg.run.seed;
        eo.workers = cfg.run.workers;
        eo.dt = cfg.run.dt;
        auto& rows = rec.series["difference"];
        for (double hzn : hs) {
            const DifferenceResult d =
                malliavin_difference_experiment(cfg.model, cfg.scheme, f, t, u, t + hzn, cfg.run.x0, C, c, eo);
            rows.push_back({hzn, d.estimate, d.stderr, d.bound});
            ok = ok && d.passed && d.lipschitz_ok;
        }
    } else if (mode == "brownian") {
        const double hv = ini.number_or("malliavin", "h", 1.0);
        const int d = cfg.model.dim;
        DirectionalOptions opt;
        opt.n_paths = cfg.run.n_paths;
        opt.seed = cfg.run.seed;
        opt.workers = cfg.run.workers;
        opt.dt = cfg.run.dt;
        if (ini.has("malliavin", "eps")) opt.eps_list = ini.numbers("malliavin", "eps");
        const Perturbation h = [hv, d](double, std::span<const double>, std::span<double> out) {
            for (int i = 0; i < d; ++i) out[i] = hv;
        };
        const DirectionalResult r = malliavin_brownian_experiment(cfg.model, h, std::abs(hv) * std::sqrt(double(d)),
                                                                  f, t, cfg.run.x0, C, c, opt);
        for (std::size_t i = 0; i < r.eps.size(); ++i)
            rec.series["finite_difference"].push_back({r.eps[i], r.values[i], r.stderrs[i], r.bound});
        rec.metrics["extrapolated"] = r.extrapolated;
        rec.metrics["extrapolated_stderr"] = r.stderr;
        rec.metrics["richardson_residual"] = r.residual;
        rec.metrics["bound"] = r.bound;
        ok = r.within_bound;
    } else {
        throw Error(ErrorCode::ConfigError, ini.source() + ": [malliavin] mode: expected difference or brownian");
    }
    rec.passed = ok;
    log << "malliavin  mode=" << mode << " passed=" << (ok ? "yes" : "no") << "\n";
    return ok ? kExitOk : kExitFailedCheck;
}

}  // namespace

std::string ResultRecord::to_json() const {
    json j;
    j["experiment_id"] = experiment_id;
    j["config_hash"] = config_hash;
    j["passed"] = passed;
    j["wall_time_s"] = wall_time;
    json m = json::object();
    for (const auto& [k, v] : metrics) m[k] = jnum(v);
    j["metrics"] = m;
    json n = json::object();
    for (const auto& [k, v] : notes) n[k] = v;
    j["notes"] = n;
    j["artifacts"] = artifacts;
    json s = json::object();
    for (const auto& [k, rows] : series) {
        json arr = json::array();
        for (const auto& r : rows)
            arr.push_back({{"t", jnum(r.t)}, {"value", jnum(r.value)}, {"stderr", jnum(r.stderr)}, {"bound", jnum(r.bound)}});
        s[k] = arr;
    }
    j["series"] = s;
    return j.dump(2);
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"certify", "simulate", "contract", "transport", "malliavin"};
    return s;
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::istringstream in(cfg.ini.canonical({"outputs"}));
    std::string text, line;
    while (std::getline(in, line)) {
        if (line.rfind("run.workers=", 0) == 0 || line.rfind("run.seed=", 0) == 0) continue;
        text += line + "\n";
    }
    text += "run.seed=" + std::to_string(cfg.run.seed) + "\n";
    return hex64(fnv1a(text));
}

std::vector<std::string> emit_plotdata(const ResultRecord& rec, const std::string& dir) {
    std::vector<std::string> paths;
    if (rec.series.empty()) return paths;
    fs::create_directories(dir);
    for (const auto& [name, rows] : rec.series) {
        const std::string path = (fs::path(dir) / (name + ".csv")).string();
        std::ofstream out(path);
        out << "t,value,stderr,bound\n";
        for (const auto& r : rows) out << num(r.t) << "," << num(r.value) << "," << num(r.stderr) << "," << num(r.bound) << "\n";
        paths.push_back(path);
    }
    return paths;
}

int run(const std::string& subcommand, const ExperimentConfig& cfg, ResultRecord& rec, std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    rec.config_hash = config_hash(cfg);
    rec.experiment_id = subcommand + "-" + rec.config_hash.substr(0, 8);
    fs::create_directories(cfg.out_dir);
    int code;
    if (subcommand == "certify") code = do_certify(cfg, rec, log);
    else if (subcommand == "simulate") code = do_simulate(cfg, rec, log);
    else if (subcommand == "contract") code = do_contract(cfg, rec, log);
    else if (subcommand == "transport") code = do_transport(cfg, rec, log);
    else if (subcommand == "malliavin") code = do_malliavin(cfg, rec, log);
    else throw Error(ErrorCode::ConfigError, "unknown subcommand '" + subcommand + "'");
    if (wants(cfg, "csv")) {
        for (const auto& p : emit_plotdata(rec, cfg.out_dir)) rec.artifacts.push_back(p);
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (wants(cfg, "json")) {
        const std::string path = (fs::path(cfg.out_dir) / "summary.json").string();
        rec.artifacts.push_back(path);
        std::ofstream out(path);
        out << rec.to_json() << "\n";
    }
    return code;
}

int run_from_file(const std::string& subcommand, const std::string& config_path, const Overrides& ov,
                  std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = build_config(IniFile::load(config_path), ov);
    } catch (const Error& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        ResultRecord rec;
        return run(subcommand, cfg, rec, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitFailedCheck;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailedCheck;
    }
}

}  // namespace jdc
