// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0
//
// Image-quality and identity metrics for inversion and ablation reports.

#pragma once

#include <string>

#include "stylefuse/backend.hpp"
#include "stylefuse/image.hpp"

namespace stylefuse {

/// One row of an evaluation table. psnr_db is derived from mse with peak 1.0
/// and capped at 99 dB when the pair is pixel-identical, so reports stay
/// serializable.
struct MetricsReport {
    double mse = 0.0;
    double ssim = 0.0;
    double psnr_db = 0.0;
    double perceptual = 0.0;
    double identity = 0.0;
};

inline constexpr double kPsnrCapDb = 99.0;

/// Mean SSIM over all valid positions of an 8x8 uniform window with the
/// standard stabilizers for unit dynamic range, averaged across channels.
/// Images smaller than the window are rejected.
double ssim_uniform8(const Image& a, const Image& b);

/// Batch means of all five metrics; pairs are matched by index. psnr_db is
/// computed from the batch-mean mse.
MetricsReport evaluate_pair(const ImageBatch& a, const ImageBatch& b,
                            const PerceptualOracle& oracle);

/// Fixed-key structured record ("mse", "ssim", "psnr_db", "perceptual",
/// "identity"), one line, parseable as JSON.
std::string metrics_report_json(const MetricsReport& report);
MetricsReport metrics_report_parse(const std::string& line);

}  // namespace stylefuse
