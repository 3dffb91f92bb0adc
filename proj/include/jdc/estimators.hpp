#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jdc/coupling.hpp"
#include "jdc/stats.hpp"

namespace jdc {

struct DecayFit {
    double rate = 0.0;
    double prefactor = 0.0;
    double stderr_rate = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
    std::size_t n_paths = 0;
    bool degenerate = false;
    std::string note;
    // Mean functional per recorded time, with batch-means standard errors.
    std::vector<double> times, means, stderrs;
};

// Least-squares fit of log E phi(|z|) against t on [t_lo, t_hi]; phi defaults to the identity.
// The window is cut where fewer than min_alive paths are uncoupled or a batch mean vanishes.
DecayFit fit_decay(const EnsembleResult& ens, const std::function<double(double)>& phi = {}, double t_lo = 1.0,
                   double t_hi = kInf, int batches = 16, std::size_t min_alive = 100);

enum class W1Method { Exact1d, Assignment, Sliced };
const char* to_string(W1Method m);

struct W1Estimate {
    double value = 0.0;
    W1Method method = W1Method::Exact1d;
    std::size_t n = 0;
    std::string bias_note;
};

// Samples are flat arrays of points in R^dim.
W1Estimate empirical_w1(std::span<const double> a, std::span<const double> b, int dim,
                        std::uint64_t projection_seed = 0x5eed);

// Optimal assignment for a square cost matrix (row major); returns the column of each row.
std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n);

struct W1Row {
    double t = 0.0;
    double w1 = 0.0;
    double ratio = 0.0;
    double bound = 0.0;       // C~ e^{-c~ t}
    double cost_stderr = 0.0; // of the coupling cost mean
    bool passed = false;
};

struct W1Report {
    std::vector<W1Row> rows;
    double w1_initial = 0.0;
    std::string note;
    bool passed = false;
};

W1Report w1_contractivity_check(const ModelSpec& model, const CouplingScheme& scheme, std::span<const double> mu,
                                std::span<const double> eta, double T, double dt, const EnsembleOptions& opt,
                                double C_tilde, double c_tilde);

using Functional = std::function<double(std::span<const double>)>;

struct ExperimentOptions {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    int workers = 0;
    double dt = 1e-3;
};

struct DifferenceResult {
    double estimate = 0.0;
    double stderr = 0.0;
    double distance_mean = 0.0;  // E|X^{(t,u)}_T - Y_T|
    double mean_g = 0.0;         // E|g(X_t, u)|
    double bound = 0.0;          // C~ e^{-c~ (T - t)} E|g|
    bool lipschitz_ok = false;
    bool passed = false;
};

DifferenceResult malliavin_difference_experiment(const ModelSpec& model, const CouplingScheme& scheme,
                                                 const Functional& f, double t, std::span<const double> u, double T,
                                                 std::span<const double> x0, double C_tilde, double c_tilde,
                                                 const ExperimentOptions& opt);

struct DirectionalOptions : ExperimentOptions {
    std::vector<double> eps_list{0.1, 0.05, 0.025};
    double abs_tol = 1e-6;
    double rel_tol = 1e-3;
};

struct DirectionalResult {
    std::vector<double> eps, values, stderrs;
    double extrapolated = 0.0;
    double stderr = 0.0;
    double residual = 0.0;
    double bound = 0.0;  // C |sigma1| (1 - e^{-ct}) / c sup|h|
    bool within_bound = false;
};

// Finite differences (1/eps) E[f(X_t)(W + eps int h) - f(X_t)(W)] with common random numbers,
// extrapolated by two-level Richardson. h(s, x) is the direction in noise coordinates.
DirectionalResult malliavin_brownian_experiment(const ModelSpec& model, const Perturbation& h, double h_sup,
                                                const Functional& f, double t, std::span<const double> x0,
                                                double C, double c, const DirectionalOptions& opt);

}  // namespace jdc
