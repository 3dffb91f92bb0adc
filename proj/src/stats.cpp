#include "jdc/stats.hpp"

#include <algorithm>
#include <cmath>

#include "jdc/errors.hpp"
#include "jdc/numerics.hpp"

namespace jdc {

void MeanVar::add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
}

void MeanVar::merge(const MeanVar& o) {
    if (o.n == 0) return;
    if (n == 0) {
        *this = o;
        return;
    }
    const double nn = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.n) / nn;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / nn;
    n += o.n;
}

double MeanVar::stderr_mean() const {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

MeanEstimate batch_mean(std::span<const double> values, int batches) {
    MeanEstimate out;
    const std::size_t n = values.size();
    if (n == 0) return out;
    out.mean = pairwise_sum(values) / static_cast<double>(n);
    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(std::max(batches, 2)), n);
    if (b < 2) return out;
    std::vector<double> means(b);
    for (std::size_t k = 0; k < b; ++k) {
        const std::size_t lo = k * n / b, hi = (k + 1) * n / b;
        means[k] = pairwise_sum(values.subspan(lo, hi - lo)) / static_cast<double>(hi - lo);
    }
    double ss = 0.0;
    const double mb = pairwise_sum(means) / static_cast<double>(b);
    for (double m : means) ss += (m - mb) * (m - mb);
    out.stderr = std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
    return out;
}

double kolmogorov_sf(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.18) {
        // Small-x form converges faster.
        const double pi2 = M_PI * M_PI;
        double s = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double t = (2 * k - 1) * (2 * k - 1) * pi2 / (8.0 * x * x);
            s += std::exp(-t);
        }
        return 1.0 - std::sqrt(2.0 * M_PI) / x * s;
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, double level) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    KsResult out;
    out.statistic = d;
    const double ne = na * nb / (na + nb);
    const double sq = std::sqrt(ne);
    out.p_value = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    out.critical = std::sqrt(-0.5 * std::log(0.5 * level)) / sq;
    out.rejected = out.p_value < level;
    return out;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) return {};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2 * n)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw Error(ErrorCode::InvalidArgument, "least_squares: need >= 2 points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

}  // namespace jdc
