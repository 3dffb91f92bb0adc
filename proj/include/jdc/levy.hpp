#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jdc/numerics.hpp"
#include "jdc/rng.hpp"

namespace jdc {

// q(r) = coeff * r^(-exponent) for r >= from.
struct PowerTail {
    double from = 0.0;
    double coeff = 0.0;
    double exponent = 0.0;
};

// Events are stored flat: vectors[i*dim .. i*dim+dim).
struct JumpBatch {
    int dim = 1;
    std::vector<double> times;
    std::vector<double> vectors;
    std::vector<double> compensator_drift;

    std::size_t size() const { return times.size(); }
    std::span<const double> vector(std::size_t i) const {
        return {vectors.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

// Surface area of the unit sphere in R^n (2 for n = 1).
double sphere_area(int n);

class RadialLevyMeasure {
public:
    using Profile = std::function<double(double)>;

    // cutoff <= 0 selects the default small-jump truncation.
    RadialLevyMeasure(Profile profile, int dim, double cutoff = 0.0, double support_upper = kInf,
                      std::optional<PowerTail> tail = std::nullopt, std::string family = "custom",
                      double max_intensity = 1e3);

    static RadialLevyMeasure stable(double alpha, double scale, int dim, double cutoff = 0.0,
                                    double max_intensity = 1e3);
    static RadialLevyMeasure tempered_stable(double alpha, double scale, double rate, int dim,
                                             double cutoff = 0.0, double max_intensity = 1e3);
    static RadialLevyMeasure truncated_stable(double alpha, double scale, double upper, int dim,
                                              double cutoff = 0.0, double max_intensity = 1e3);
    static RadialLevyMeasure gaussian(double mass_density, double width, int dim, double cutoff = 0.0);
    static RadialLevyMeasure uniform_ball(double density, double radius, int dim, double cutoff = 0.0);
    static RadialLevyMeasure tabulated(std::vector<double> rs, std::vector<double> qs, int dim,
                                       double cutoff = 0.0, double max_intensity = 1e3);

    double radial_density(double r) const;
    double density(std::span<const double> v) const;
    // Density of the simulated jump law: q(v) 1{|v| >= cutoff}.
    double truncated_density(std::span<const double> v) const;
    double truncated_radial_density(double r) const {
        return r >= cutoff_ ? radial_density(r) : 0.0;
    }

    int dim() const { return dim_; }
    double cutoff() const { return cutoff_; }
    double support_upper() const { return support_upper_; }
    const std::optional<PowerTail>& tail() const { return tail_; }
    const std::string& family() const { return family_; }

    // S_{d-1} * int_a^b r^k q(r) r^{d-1} dr, b may be infinite.
    double radial_moment(double k, double a, double b) const;
    // nu(|v| >= cutoff).
    double intensity() const { return intensity_; }
    // Density of the first coordinate marginal at y.
    double marginal_density(double y) const;

    double sample_radius(Rng& rng) const;
    void sample_direction(Rng& rng, std::span<double> out) const;
    void sample_jump(Rng& rng, std::span<double> out) const;

private:
    void choose_cutoff(double max_intensity);
    void build_sampler();

    Profile profile_;
    int dim_ = 1;
    double cutoff_ = 0.0;
    double support_upper_ = kInf;
    std::optional<PowerTail> tail_;
    std::string family_;

    double intensity_ = kInf;
    double table_upper_ = 0.0;
    double table_mass_ = 0.0;
    MonotoneCubic inverse_cdf_;  // cumulative fraction -> log r
};

double compute_gamma(const RadialLevyMeasure& measure);
double compute_c_eps(const RadialLevyMeasure& measure, double eps);

struct L5Probe {
    bool passed = false;
    double bound = kInf;
    double witness_eps = 0.0;
    std::vector<double> eps;
    std::vector<double> ratio;
};

// Non-throwing evaluation of eps / C_eps on eps = lambda_cap 2^-k, k = 0..40.
L5Probe probe_L5(const RadialLevyMeasure& measure, double lambda_cap);
// Returns the grid bound K(lambda); throws AssumptionViolated otherwise.
double check_L5(const RadialLevyMeasure& measure, double lambda_cap);

double compute_beta_L(const RadialLevyMeasure& measure, double lam);

JumpBatch sample_jumps(const RadialLevyMeasure& measure, double dt, Rng& rng);

// Shared helper: int_a^b f on a log scale with optional analytic tail beyond `tail_from`.
// Returns +inf when the tail does not converge.
QuadResult integrate_radial(const std::function<double(double)>& f, double a, double b,
                            const std::function<double(double)>* analytic_tail = nullptr,
                            double tail_from = 0.0);

// int_0^b F, where F(y) behaves like a power near 0; the piece below b*1e-10 is
// extrapolated from the local exponent.
QuadResult integrate_from_zero(const std::function<double(double)>& f, double b);

}  // namespace jdc
