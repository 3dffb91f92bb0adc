#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace jdc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_depth = 60;
    std::size_t max_evals = 4'000'000;
    int initial_panels = 16;
};

// Adaptive Simpson with Richardson correction on each accepted panel.
QuadResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                            const QuadOptions& opt = {});

// Integral of f over [a, b] (0 < a < b) after the substitution r = e^s.
QuadResult integrate_log(const std::function<double(double)>& f, double a, double b,
                         const QuadOptions& opt = {});

// Fixed 8-point Gauss-Legendre rule on [a, b].
template <class F>
double gauss_legendre8(F&& f, double a, double b) {
    static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290,
                                    0.7966664774136267, 0.9602898564975363};
    static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873,
                                    0.2223810344533745, 0.1012285362903763};
    const double m = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += w[i] * (f(m - h * x[i]) + f(m + h * x[i]));
    return h * s;
}

// Maximizer of a unimodal function on [a, b].
struct GoldenResult {
    double arg = 0.0;
    double value = 0.0;
};
GoldenResult golden_max(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_iter = 400);

// Fritsch-Carlson monotone piecewise cubic interpolant.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> xs, std::vector<double> ys);

    double operator()(double x) const;
    double x_front() const { return xs_.front(); }
    double x_back() const { return xs_.back(); }
    bool empty() const { return xs_.empty(); }

private:
    std::vector<double> xs_, ys_, ms_;
};

double log_add_exp(double a, double b);

// Pairwise summation; result independent of how the data was produced.
double pairwise_sum(std::span<const double> v);

}  // namespace jdc
