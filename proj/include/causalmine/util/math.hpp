#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace causalmine {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_normal_pdf(double x, double mean, double variance) {
    if (variance <= 0.0) return kNegInf;
    const double d = x - mean;
    return -0.5 * (d * d / variance + std::log(2.0 * M_PI * variance));
}

inline double normal_pdf(double x, double mean, double variance) {
    return std::exp(log_normal_pdf(x, mean, variance));
}

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
    if (sd <= 0.0) return x < mean ? 0.0 : 1.0;
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

// Inverse standard normal CDF: Acklam's rational approximation refined with
// two Newton steps, accurate to ~1e-15 over (0,1).
double normal_quantile(double p);

// Sample a standard-normal variate truncated to {u > lo} (or {u <= hi}) by
// inverse-CDF; exact, no rejection loop.
double truncated_normal_above(double lo, double u01);
double truncated_normal_below(double hi, double u01);

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;
};

// Weighted mean/variance; weights need not be normalized.
inline MeanVar weighted_mean_var(std::span<const double> values, std::span<const double> weights) {
    double wsum = 0.0, m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        wsum += weights[i];
        m += weights[i] * values[i];
    }
    if (wsum <= 0.0) return {};
    m /= wsum;
    double v = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - m;
        v += weights[i] * d * d;
    }
    return {m, v / wsum};
}

}  // namespace causalmine
