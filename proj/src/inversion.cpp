// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include "stylefuse/inversion.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "stylefuse/optimizer.hpp"

namespace stylefuse {

LatentCode mean_latent(const Generator3D& g, SeededRng& rng, int samples) {
    if (samples < 1) throw ConfigError("mean_latent: samples must be >= 1");
    Eigen::VectorXd z(g.latent_width());
    LatentCode acc(g.latent_layers(), g.latent_width());
    for (int s = 0; s < samples; ++s) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        acc.values += g.map_noise(z).values;
    }
    acc.values /= static_cast<double>(samples);
    return acc;
}

CameraPose init_pose_from_photo(const ImageBatch& style, const LatentCode& w2d,
                                SeededRng& rng, const InversionConfig& cfg,
                                const Generator2D& g2d, const PoseEstimator& est) {
    cfg.validate();
    if (style.empty()) throw DimensionError("init_pose_from_photo: empty style batch");
    for (const auto& img : style) {
        if (img.height != g2d.image_height() || img.width != g2d.image_width())
            throw DimensionError("init_pose_from_photo: style image shape mismatch");
    }
    Eigen::VectorXd z(g2d.latent_width());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const LatentCode remixed =
        mix_latent(w2d, g2d.map_noise(z), cfg.alpha, cfg.perturb_range_2d);
    return est.estimate(g2d.render(remixed));
}

LossBreakdown composite_inversion_loss(const ImageBatch& gen, const ImageBatch& target,
                                       const PerceptualOracle& oracle,
                                       const InversionWeights& weights,
                                       std::vector<Image>* grads) {
    if (gen.empty() || gen.size() != target.size())
        throw DimensionError("composite_inversion_loss: batch sizes differ");
    const double inv_n = 1.0 / static_cast<double>(gen.size());

    LossBreakdown out;
    if (grads) grads->assign(gen.size(), Image());
    for (std::size_t i = 0; i < gen.size(); ++i) {
        require_same_shape(gen[i], target[i], "composite_inversion_loss");
        if (!grads) {
            out.l2 += inv_n * oracle.pixel_l2(gen[i], target[i]);
            out.lpips += inv_n * oracle.perceptual(gen[i], target[i]);
            out.id += inv_n * (1.0 - oracle.identity(gen[i], target[i]));
            out.depth += inv_n * oracle.depth(gen[i], target[i]);
            continue;
        }
        Image& total_grad = (*grads)[i];
        total_grad = Image(gen[i].height, gen[i].width, gen[i].channels);
        Image scratch(gen[i].height, gen[i].width, gen[i].channels);

        out.l2 += inv_n * oracle.pixel_l2_grad(gen[i], target[i], scratch);
        total_grad.data += (weights.l2 * inv_n) * scratch.data;

        scratch.data.setZero();
        out.lpips += inv_n * oracle.perceptual_grad(gen[i], target[i], scratch);
        total_grad.data += (weights.lpips * inv_n) * scratch.data;

        scratch.data.setZero();
        out.id += inv_n * (1.0 - oracle.identity_grad(gen[i], target[i], scratch));
        total_grad.data -= (weights.id * inv_n) * scratch.data;

        scratch.data.setZero();
        out.depth += inv_n * oracle.depth_grad(gen[i], target[i], scratch);
        total_grad.data += (weights.depth * inv_n) * scratch.data;
    }
    out.total = weights.l2 * out.l2 + weights.lpips * out.lpips + weights.id * out.id +
                weights.depth * out.depth;
    return out;
}

namespace {

CameraConventions conventions_of(const CameraPose& pose) {
    CameraConventions conv;
    conv.radius = pose.radius();
    conv.focal = pose.intrinsic(0, 0);
    conv.principal = pose.intrinsic(0, 2);
    return conv;
}

}  // namespace

InversionResult invert_artistic(const ImageBatch& style, const CameraPose& init_pose,
                                const InversionConfig& cfg, const Generator3D& g3d,
                                const PerceptualOracle& oracle, SeededRng& rng,
                                const InversionStepFn& on_step) {
    cfg.validate();
    init_pose.validate();
    if (style.empty()) throw DimensionError("invert_artistic: empty style batch");

    const CameraConventions conv = conventions_of(init_pose);
    LatentCode w = mean_latent(g3d, rng, cfg.mean_latent_samples);
    Eigen::VectorXd pose_params(2);
    pose_params << init_pose.yaw_deg(), init_pose.pitch_deg();

    AdamOptimizer opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    const int layers = g3d.latent_layers(), width = g3d.latent_width();

    InversionResult best;
    best.w3d = w;
    best.pose = init_pose;
    best.loss.total = std::numeric_limits<double>::infinity();

    GeneratorGrads grads;
    std::vector<Image> image_grads;
    for (int step = 0; step < cfg.steps; ++step) {
        const CameraPose pose = pose_from_angles(pose_params[0], pose_params[1], conv);
        const Image render = g3d.render(w, pose);
        ImageBatch gen(style.size(), render);
        const LossBreakdown loss =
            composite_inversion_loss(gen, style, oracle, cfg.weights, &image_grads);
        if (!std::isfinite(loss.total))
            throw DivergenceError("invert_artistic: non-finite loss", step);

        if (loss.total < best.loss.total) {
            best.w3d = w;
            best.pose = pose;
            best.loss = loss;
        }
        if (on_step) on_step({step, loss, pose_params[0], pose_params[1]});

        grads.reset(layers, width, {}, {});
        for (const auto& ig : image_grads) g3d.render_backward(w, pose, ig, grads, {});

        Eigen::Map<Eigen::VectorXd> wflat(w.values.data(), w.values.size());
        Eigen::Map<const Eigen::VectorXd> wgrad(grads.d_latent.data(),
                                                grads.d_latent.size());
        opt.step("w3d", wflat, wgrad);
        Eigen::Vector2d pose_grad(grads.d_yaw, grads.d_pitch);
        opt.step("pose", pose_params, pose_grad);
    }
    best.steps = cfg.steps;
    return best;
}

}  // namespace stylefuse
