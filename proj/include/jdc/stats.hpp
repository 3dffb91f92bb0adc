#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace jdc {

// Welford accumulator; merge() combines partial results from separate workers.
struct MeanVar {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x);
    void merge(const MeanVar& other);
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_mean() const;
};

struct MeanEstimate {
    double mean = 0.0;
    double stderr = 0.0;
};

// Mean with standard error from contiguous batch means.
MeanEstimate batch_mean(std::span<const double> values, int batches = 16);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double critical = 0.0;  // at the requested level
    bool rejected = false;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov law.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, double level = 1e-3);

// Complementary Kolmogorov distribution P(K > x).
double kolmogorov_sf(double x);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 3.0);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace jdc
