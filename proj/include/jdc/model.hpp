#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jdc/levy.hpp"
#include "jdc/numerics.hpp"
#include "jdc/rng.hpp"

namespace jdc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;
using Curvature = std::function<double(double)>;

struct DriftSpec {
    VectorField b;
    Curvature kappa;
    std::optional<std::pair<double, double>> d1_constants;  // (R, K)
    std::string name = "custom";
};

struct DiffusionSpec {
    Mat sigma1;                                       // d x d additive coefficient, may be empty
    std::function<Mat(std::span<const double>)> sigma;  // d x m multiplicative coefficient
    double sigma_inf = 0.0;

    bool has_additive() const;
    bool has_multiplicative() const { return static_cast<bool>(sigma); }
    // sup{|sigma1^-1 z|^2 : |z| = 1}; +inf when sigma1 is singular.
    double alpha() const;
    // Largest singular value of sigma1.
    double sigma1_norm() const;
};

// Finite measure on the mark space U, given by atoms or by a 1-D density on [lo, hi].
class MarkMeasure {
public:
    static MarkMeasure atoms(std::vector<std::vector<double>> points, std::vector<double> weights);
    static MarkMeasure density_1d(std::function<double(double)> density, double lo, double hi);

    int dim() const { return dim_; }
    double total_mass() const { return mass_; }
    void sample(Rng& rng, std::span<double> out) const;
    // int F(u) nu(du).
    double integrate(const std::function<double(std::span<const double>)>& F) const;
    bool is_atomic() const { return !points_.empty(); }

private:
    int dim_ = 1;
    double mass_ = 0.0;
    std::vector<std::vector<double>> points_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    std::function<double(double)> density_;
    double lo_ = 0.0, hi_ = 0.0;
    MonotoneCubic inverse_;
};

struct JumpCoeffSpec {
    std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> out)> g;
    std::function<double(std::span<const double> u)> g_inf;
    MarkMeasure intensity;
};

struct ModelSpec {
    DriftSpec drift;
    DiffusionSpec diffusion;
    std::optional<RadialLevyMeasure> levy;
    std::optional<JumpCoeffSpec> jump;
    int dim = 1;

    bool has_noise() const;
    // (det sigma1 > 0) or (levy present and D2 holds).
    bool contraction_applicable() const;
};

enum class Status { Pass, Fail, Unknown };
const char* to_string(Status s);

struct AssumptionEntry {
    std::string name;
    Status status = Status::Unknown;
    std::string witness;
};

struct AssumptionReport {
    std::vector<AssumptionEntry> entries;
    std::optional<std::pair<double, double>> d1;  // reported (R, K)
    bool contraction_applicable = false;
    std::string kappa_variant;

    const AssumptionEntry* find(const std::string& name) const;
    bool all_pass() const;
};

struct ValidationOptions {
    double box = 5.0;
    double tol = 1e-9;
    double r_max = 1e3;
};

AssumptionReport validate_assumptions(const ModelSpec& model, std::size_t budget, Rng& rng,
                                      const ValidationOptions& opt = {});

bool d2_holds(const Curvature& kappa);

// Curvature for the Brownian route with a non-scalar sigma1:
// kappa+(r) / s_max^2 - kappa-(r) * alpha.
Curvature brownian_kappa(const ModelSpec& model);

struct SplitResult {
    ModelSpec model;
    double lambda_sq = 0.0;          // smallest eigenvalue of sigma sigma^T seen
    double lipschitz_factor = 0.0;   // M / sqrt(lambda^2 - C^2)
};

SplitResult split_diffusion(const ModelSpec& model, double C, std::size_t budget, Rng& rng, double box = 5.0);

// Symmetric PSD square root via eigendecomposition.
Mat symmetric_sqrt(const Mat& a);

// Built-in drifts.
DriftSpec linear_drift(double K);
// b(x) = x - x^3 (componentwise); kappa supplied by the caller.
DriftSpec double_well_drift(Curvature kappa);
// kappa = -L on [0, R), K on [R + 1, inf), linear in between.
Curvature piecewise_kappa(double L, double R, double K);
// b(x) = -a x + beta sin(omega x) componentwise, paired with piecewise_kappa(L, R, K).
DriftSpec piecewise_drift(double a, double beta, double omega, double L, double R, double K);

}  // namespace jdc
