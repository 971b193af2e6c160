#pragma once

// Sample-moment and Kolmogorov-Smirnov helpers for the Monte Carlo
// verification suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "rcbar/mat.hpp"

namespace rcbar {

// Asymptotic one-sample KS critical values: D > coeff/sqrt(N) rejects.
inline constexpr double kKsCritical1Percent = 1.63;
inline constexpr double kKsCritical5Percent = 1.36;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct MomentStats {
    double mean = 0.0;
    double sd = 0.0;        // sample standard deviation (N-1)
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

inline MomentStats moment_stats(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("moment_stats: need at least 2 samples");
    KahanSum sum;
    for (double x : xs) sum.add(x);
    const double mean = sum.value() / static_cast<double>(n);
    KahanSum m2, m3, m4;
    for (double x : xs) {
        const double d = x - mean;
        m2.add(d * d);
        m3.add(d * d * d);
        m4.add(d * d * d * d);
    }
    const double c2 = m2.value() / static_cast<double>(n);
    const double c3 = m3.value() / static_cast<double>(n);
    const double c4 = m4.value() / static_cast<double>(n);
    MomentStats s;
    s.mean = mean;
    s.sd = std::sqrt(m2.value() / static_cast<double>(n - 1));
    if (c2 > 0.0) {
        s.skewness = c3 / std::pow(c2, 1.5);
        s.excess_kurtosis = c4 / (c2 * c2) - 3.0;
    }
    return s;
}

// sup |F_n - Phi| for already-standardized samples.
inline double ks_statistic_normal(std::span<const double> standardized) {
    if (standardized.empty()) throw std::invalid_argument("ks: empty sample");
    std::vector<double> xs(standardized.begin(), standardized.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = normal_cdf(xs[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / n,
                                 static_cast<double>(i + 1) / n - f));
    }
    return d;
}

inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks: empty sample");
    std::vector<double> xs(a.begin(), a.end());
    std::vector<double> ys(b.begin(), b.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const double na = static_cast<double>(xs.size());
    const double nb = static_cast<double>(ys.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < xs.size() && j < ys.size()) {
        if (xs[i] <= ys[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

// Two-sample KS threshold at level alpha in {0.05, 0.01}.
inline double ks_two_sample_critical(std::size_t na, std::size_t nb, double coeff) {
    return coeff * std::sqrt((static_cast<double>(na) + static_cast<double>(nb)) /
                             (static_cast<double>(na) * static_cast<double>(nb)));
}

// Linear-interpolation quantile of an unsorted sample (sorts a copy).
inline double quantile(std::span<const double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    if (p <= 0.0) return v.front();
    if (p >= 1.0) return v.back();
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline double median(std::span<const double> xs) { return quantile(xs, 0.5); }

}  // namespace rcbar
