#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jdc/model.hpp"

namespace jdc {

enum class SchemeKind { Synchronous, Reflection, Mirror, Mixed };
const char* to_string(SchemeKind k);
SchemeKind scheme_from_string(const std::string& s);

struct CouplingScheme {
    SchemeKind variant = SchemeKind::Synchronous;
    double mixed_delta = 0.0;        // mixed only
    double couple_threshold = 0.0;   // <= 0 selects max(1e-6, 1e-2 sqrt(dt))
};

double default_couple_threshold(double dt);

enum class JumpLabel { Accepted, Reflected, Common };
const char* to_string(JumpLabel l);

struct JumpRecord {
    double t = 0.0;
    std::size_t step = 0;
    std::vector<double> v;
    JumpLabel label = JumpLabel::Common;
};

struct CoupledPath {
    int dim = 1;
    std::vector<double> times;
    std::vector<double> x, y;  // dim values per recorded time
    std::vector<JumpRecord> jump_log;
    double coupling_time = kInf;
    bool glued = false;
    std::size_t accepted = 0, rejected = 0;

    std::span<const double> x_at(std::size_t k) const { return {x.data() + k * dim, static_cast<std::size_t>(dim)}; }
    std::span<const double> y_at(std::size_t k) const { return {y.data() + k * dim, static_cast<std::size_t>(dim)}; }
};

// Drift perturbation h(t, x) added to the first component of the pair.
using Perturbation = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

struct PathOptions {
    std::size_t record_every = 1;
    bool record_jumps = false;
    double path_cap = 1e8;
    Perturbation h;  // set: drift-perturbed mode, no gluing
};

// Noise mapping of the reflection coupling: X gets sigma1 dW, Y gets sigma1 (I - 2 e e^T) dW
// with e = sigma1^-1 (x - y) / |sigma1^-1 (x - y)|.
void step_reflection(std::span<const double> x, std::span<const double> y, std::span<const double> dW,
                     const Mat& sigma1, std::span<double> noise_x, std::span<double> noise_y);

// Thinning probability of the mirror coupling, using the density of the simulated jump law.
double mirror_accept_prob(std::span<const double> v, std::span<const double> z, const RadialLevyMeasure& measure);

// X jumps by v; Y jumps by x - y + v if u < rho, otherwise by the reflection of v. Returns accepted.
bool step_mirror(std::span<double> x, std::span<double> y, std::span<const double> v, double u,
                 const RadialLevyMeasure& measure);

// lambda(|z|) ramp: 0 for |z| <= delta/2, 1 for |z| >= delta.
double mixed_lambda(double r, double delta);

// Noise mapping of the mixed coupling.
void step_mixed(std::span<const double> x, std::span<const double> y, std::span<const double> dW1,
                std::span<const double> dW2, double delta, const Mat& sigma1, std::span<double> noise_x,
                std::span<double> noise_y);

CoupledPath simulate_coupled(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> x0,
                             std::span<const double> y0, double T, double dt, Rng& rng,
                             const PathOptions& opt = {});

// X~ follows the drift perturbed by h, Y the plain equation, both from x0, mixed coupling.
CoupledPath simulate_drift_perturbed(const ModelSpec& model, const Perturbation& h, const CouplingScheme& scheme,
                                     std::span<const double> x0, double T, double dt, Rng& rng,
                                     const PathOptions& opt = {});

struct EnsembleOptions {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    int workers = 0;               // 0: OpenMP default
    std::size_t record_every = 100;
    double burn_in = 0.0;          // > 0: start from independent burn-in endpoints of x0 and y0
    double path_cap = 1e8;
    Perturbation h;
    std::vector<double> x_starts, y_starts;  // optional per-path starts, n_paths x dim
    bool record_positions = false;
};

struct EnsembleResult {
    int dim = 1;
    std::size_t n_paths = 0;
    std::vector<double> times;
    std::vector<double> dist;        // |x - y|, n_paths x times.size()
    std::vector<double> x_start, y_start, x_final, y_final;  // n_paths x dim
    std::vector<double> coupling_time;
    std::vector<std::size_t> accepted, rejected;
    std::vector<double> x_path, y_path;  // n_paths x times x dim when positions are recorded

    double dist_at(std::size_t path, std::size_t k) const { return dist[path * times.size() + k]; }
    std::size_t coupled_by(std::size_t k) const;
};

// OpenMP over paths; results are independent of the worker count.
EnsembleResult run_ensemble(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> x0,
                            std::span<const double> y0, double T, double dt, const EnsembleOptions& opt);
// Serial reference with identical output.
EnsembleResult run_ensemble_serial(const ModelSpec& model, const CouplingScheme& scheme,
                                   std::span<const double> x0, std::span<const double> y0, double T, double dt,
                                   const EnsembleOptions& opt);

}  // namespace jdc
