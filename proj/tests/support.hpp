// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared test oracles, kept independent of the implementation paths they
// check: plain loops, finite differences, and textbook statistics only.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "stylefuse/image.hpp"
#include "stylefuse/latent.hpp"

namespace testsupport {

/// Elementwise affine mix oracle, written as the same scalar expression the
/// contract states: w*b + (1-w)*i on masked layers, b elsewhere.
inline stylefuse::LatentCode mix_oracle(const stylefuse::LatentCode& base,
                                        const stylefuse::LatentCode& injected,
                                        double weight, int lo, int hi) {
    stylefuse::LatentCode out = base;
    const double one_minus = 1.0 - weight;
    for (Eigen::Index l = 0; l < base.layers(); ++l) {
        if (l + 1 < lo || l + 1 > hi) continue;
        for (Eigen::Index k = 0; k < base.width(); ++k)
            out.values(l, k) =
                weight * base.values(l, k) + one_minus * injected.values(l, k);
    }
    return out;
}

/// Brute-force mean squared error over every pixel and channel.
inline double mse_oracle(const stylefuse::Image& a, const stylefuse::Image& b) {
    double acc = 0.0;
    long n = 0;
    for (int c = 0; c < a.channels; ++c)
        for (int i = 0; i < a.height; ++i)
            for (int j = 0; j < a.width; ++j) {
                const double d = a(i, j, c) - b(i, j, c);
                acc += d * d;
                ++n;
            }
    return acc / static_cast<double>(n);
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(lo, hi).
inline double ks_statistic_uniform(std::vector<double> samples, double lo,
                                   double hi) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = (samples[i] - lo) / (hi - lo);
        const double lo_step = static_cast<double>(i) / n;
        const double hi_step = static_cast<double>(i + 1) / n;
        d = std::max({d, std::abs(cdf - lo_step), std::abs(cdf - hi_step)});
    }
    return d;
}

/// Asymptotic KS critical value; alpha = 0.01 -> c = 1.62762.
inline double ks_critical(double n, double c_alpha = 1.62762) {
    return c_alpha / (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
}

/// Central finite difference d f / d x at the given coordinate of a vector
/// argument, via a mutate-and-evaluate callback.
inline double central_difference(const std::function<double(double)>& f_of_x,
                                 double x0, double h) {
    return (f_of_x(x0 + h) - f_of_x(x0 - h)) / (2.0 * h);
}

/// Relative error with an absolute floor for near-zero references.
inline double rel_error(double got, double want, double floor_abs = 1e-12) {
    return std::abs(got - want) / std::max(std::abs(want), floor_abs);
}

}  // namespace testsupport
