#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jdc/levy.hpp"
#include "jdc/model.hpp"

namespace jdc {

enum class FnKind { Brownian, Jump };
const char* to_string(FnKind k);

struct DistanceConstants {
    // Brownian route
    double c = 0.0;
    double C = 0.0;
    double R0 = 0.0;
    double R1 = 0.0;
    double alpha = 1.0;
    // Jump route; c1 underflows for strongly negative curvature, log_c1 does not.
    double c1 = 0.0;
    double log_c1 = -kInf;
    double C_eps = 0.0;
    double eps = 0.0;
    double delta = 0.0;
    double M = 0.0;
    double gamma = 0.0;
    double jump_R0 = 0.0;  // inf{R : h(r) >= 0 for r >= R}
    double log_phi_inf = 0.0;
};

namespace detail {
struct BrownianTables;
struct JumpTables;
}  // namespace detail

class ConcaveDistanceFn {
public:
    FnKind kind = FnKind::Brownian;
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> first_deriv;
    std::vector<double> second_deriv;
    double tail_slope = 0.0;
    double tail_intercept = 0.0;
    double a1 = 0.0;
    double a2 = 1.0;
    double log_a1 = -kInf;
    DistanceConstants constants;

    double r_max() const { return grid.empty() ? 0.0 : grid.back(); }
    double operator()(double r) const;
    double derivative(double r) const;

    std::shared_ptr<const detail::BrownianTables> brownian;
    std::shared_ptr<const detail::JumpTables> jump;
};

struct BrownianOptions {
    int log_points = 400;        // on (1e-8, 1]
    int linear_points = 4600;    // on [1, r_max]
    double certify_tol = 1e-8;
    double bisection_rel = 1e-4;
    std::optional<double> R1;    // skip the scan
};

struct FeasibilityStep {
    int k = 0;
    double delta = 0.0;
    double eps = 0.0;
    double C_eps = 0.0;
    double M = 0.0;
    bool feasible = false;
};

struct JumpOptions {
    double lambda_cap = 1.0;
    int pitch_divisor = 32;
    std::size_t max_nodes = 30'000'000;
    double certify_tol = 1e-8;
    bool scan = false;          // continue past the first feasible delta and keep the largest log c1
    int scan_extra = 4;
    std::optional<int> k_override;
    std::vector<FeasibilityStep>* log = nullptr;
};

double find_R0(const Curvature& kappa, double r_scan = 1e3);

ConcaveDistanceFn build_f_brownian(const Curvature& kappa, double alpha, const BrownianOptions& opt = {});
ConcaveDistanceFn build_f1_jump(const Curvature& kappa, const RadialLevyMeasure& measure, double gamma,
                                const JumpOptions& opt = {});

struct CertifyParams {
    double tol = 1e-8;
    double rate_scale = 1.0;  // multiplies c (resp. c1) inside the residual only
    int refine = 1;           // extra points per cell: refine = 1 adds midpoints
};

struct Certificate {
    std::string inequality_id;
    std::vector<double> grid;
    double max_residual = -kInf;
    double argmax_r = 0.0;
    bool passed = false;
    DistanceConstants constants_used;
    std::uint64_t grid_hash = 0;
};

Certificate certify(const ConcaveDistanceFn& fn, FnKind kind, const Curvature& kappa,
                    const CertifyParams& params = {});

std::uint64_t hash_doubles(const std::vector<double>& v);

}  // namespace jdc
