#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jdc/levy.hpp"
#include "jdc/model.hpp"

namespace jdc {

// int (e^{lam g_inf(u)} - lam g_inf(u) - 1) nu(du); +inf when not finite.
double compute_beta(const JumpCoeffSpec& jump, double lam);

// e^x - x - 1 without cancellation.
double exp_remainder_1(double x);

enum class DevKind { AlphaT, AlphaTPath, AlphaInf, Custom };
const char* to_string(DevKind k);

struct RateConstants {
    double C_tilde = 1.0;  // E|X_t(x) - Y_t(y)| <= C_tilde e^{-c_tilde t} |x - y|
    double c_tilde = 1.0;
    double C = 1.0;        // drift perturbation constants
    double c = 1.0;
    double sigma_inf = 0.0;
    double sigma1_norm = 0.0;
};

// alpha(r) = sup_{lam >= 0} { r lam - Psi(lam) },
// Psi(lam) = int_0^T [beta + beta_L](w(t) lam) dt + gauss * lam^2 / 2.
struct DeviationFunction {
    DevKind kind = DevKind::Custom;
    double T = 0.0;
    std::function<double(double)> weight;
    // Set when weight(t) = exp_scale * e^{-exp_rate (T - t)}; enables a fixed Gauss rule in psi.
    double exp_scale = 0.0;
    double exp_rate = 0.0;
    double gauss = 0.0;
    std::function<double(double)> beta;    // may be empty
    std::function<double(double)> beta_L;  // may be empty
    std::function<double(double)> custom_psi;
    double lambda_max = kInf;
    std::vector<double> lam_grid, beta_table, beta_L_table;
    std::string note;

    double psi(double lam) const;
    double operator()(double r) const;
};

// Deviation function with general rate functions c1, c2, c3.
DeviationFunction make_alpha_general(double T, std::function<double(double)> c1, double c2_T,
                                     std::function<double(double)> c3, double sigma_inf,
                                     std::function<double(double)> beta);
DeviationFunction make_alpha_T(double T, const RateConstants& k, std::function<double(double)> beta,
                               std::function<double(double)> beta_L = {});
DeviationFunction make_alpha_T_path(double T, const RateConstants& k, std::function<double(double)> beta,
                                    std::function<double(double)> beta_L = {});
// alpha_T at T = 50 / c_tilde, checked against T = 100 / c_tilde on r_check.
DeviationFunction make_alpha_inf(const RateConstants& k, std::function<double(double)> beta,
                                 std::function<double(double)> beta_L = {},
                                 const std::vector<double>& r_check = {0.1, 1.0, 10.0});
DeviationFunction make_alpha_custom(std::function<double(double)> psi, double lambda_max = kInf);

double eval_alpha(const DeviationFunction& dev, double r);

// sup_{r >= 0} (r lam - alpha(r)); throws Unbounded past r_cap.
double convex_conjugate(const std::function<double(double)>& alpha, double lam, double r_cap = 1e8);

struct MgfRow {
    double lam = 0.0;
    double empirical = 0.0;  // log E e^{lam (f - mean)}
    double stderr = 0.0;
    double conjugate = 0.0;  // alpha*(lam)
    double explicit_bound = 0.0;  // Psi(lam)
    bool passed = false;
};

struct MgfReport {
    std::vector<MgfRow> rows;
    bool passed = false;
};

MgfReport mgf_check(std::span<const double> samples, const DeviationFunction& dev,
                    const std::vector<double>& lam_grid);

struct TailRow {
    double r = 0.0;
    double empirical = 0.0;
    double wilson_lo = 0.0;
    double wilson_hi = 0.0;
    double bound = 1.0;
    bool passed = false;
};

struct TailReport {
    std::vector<TailRow> rows;
    std::size_t blocks = 0;
    bool passed = false;
};

// Blocks of n_block consecutive samples; compares P(block mean - mu > r) with e^{-n alpha(r)}.
TailReport tail_check(std::span<const double> samples, double mu, const DeviationFunction& dev,
                      const std::vector<double>& r_grid, std::size_t n_block);

}  // namespace jdc
