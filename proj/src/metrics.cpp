// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include "stylefuse/metrics.hpp"

#include <cmath>

#include <json.hpp>

namespace stylefuse {

namespace {

using json = nlohmann::json;

constexpr int kWin = 8;
constexpr double kC1 = 0.01 * 0.01;  // (k1 * L)^2 for L = 1
constexpr double kC2 = 0.03 * 0.03;

double mse_pair(const Image& a, const Image& b) {
    return (a.data - b.data).square().mean();
}

}  // namespace

double ssim_uniform8(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw DimensionError("ssim: image shape mismatch");
    if (a.height < kWin || a.width < kWin)
        throw DimensionError("ssim: image smaller than the 8x8 window");

    const double inv_n = 1.0 / static_cast<double>(kWin * kWin);
    double acc = 0.0;
    long windows = 0;
    for (int c = 0; c < a.channels; ++c) {
        const auto pa = a.plane(c);
        const auto pb = b.plane(c);
        for (int i = 0; i + kWin <= a.height; ++i) {
            for (int j = 0; j + kWin <= a.width; ++j) {
                const auto wa = pa.block(i, j, kWin, kWin);
                const auto wb = pb.block(i, j, kWin, kWin);
                const double mu_a = wa.mean();
                const double mu_b = wb.mean();
                const double var_a = wa.square().sum() * inv_n - mu_a * mu_a;
                const double var_b = wb.square().sum() * inv_n - mu_b * mu_b;
                const double cov = (wa * wb).sum() * inv_n - mu_a * mu_b;
                acc += (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2) /
                       ((mu_a * mu_a + mu_b * mu_b + kC1) *
                        (var_a + var_b + kC2));
                ++windows;
            }
        }
    }
    return acc / static_cast<double>(windows);
}

MetricsReport evaluate_pair(const ImageBatch& a, const ImageBatch& b,
                            const PerceptualOracle& oracle) {
    if (a.empty() || a.size() != b.size())
        throw DimensionError("evaluate_pair: batches must pair up");

    MetricsReport out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].same_shape(b[i]))
            throw DimensionError("evaluate_pair: image shape mismatch");
        out.mse += mse_pair(a[i], b[i]);
        out.ssim += ssim_uniform8(a[i], b[i]);
        out.perceptual += oracle.perceptual(a[i], b[i]);
        out.identity += oracle.identity(a[i], b[i]);
    }
    const double inv = 1.0 / static_cast<double>(a.size());
    out.mse *= inv;
    out.ssim *= inv;
    out.perceptual *= inv;
    out.identity *= inv;
    out.psnr_db = out.mse > 0.0
                      ? std::min(kPsnrCapDb, -10.0 * std::log10(out.mse))
                      : kPsnrCapDb;
    return out;
}

std::string metrics_report_json(const MetricsReport& report) {
    return json{{"mse", report.mse},
                {"ssim", report.ssim},
                {"psnr_db", report.psnr_db},
                {"perceptual", report.perceptual},
                {"identity", report.identity}}
        .dump();
}

MetricsReport metrics_report_parse(const std::string& line) {
    try {
        const json j = json::parse(line);
        MetricsReport out;
        out.mse = j.at("mse").get<double>();
        out.ssim = j.at("ssim").get<double>();
        out.psnr_db = j.at("psnr_db").get<double>();
        out.perceptual = j.at("perceptual").get<double>();
        out.identity = j.at("identity").get<double>();
        return out;
    } catch (const json::exception&) {
        throw CheckpointError("metrics: malformed record: " + line);
    }
}

}  // namespace stylefuse
