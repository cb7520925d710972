// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "stylefuse/backend.hpp"
#include "stylefuse/camera.hpp"
#include "stylefuse/latent.hpp"

namespace stylefuse {

/// Weights for the composite inversion objective. Each term is reported
/// separately so runs can be compared across weight choices.
struct InversionWeights {
    double l2 = 1.0;
    double lpips = 0.8;
    double id = 0.1;
    double depth = 1.0;
};

struct InversionConfig {
    double alpha = 0.2;
    LayerRange perturb_range_2d{13, 18};
    int steps = 500;
    double lr = 0.01;
    int mean_latent_samples = 10000;
    InversionWeights weights;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("inversion: alpha must lie in [0, 1]");
        if (steps < 1) throw ConfigError("inversion: steps must be >= 1");
        if (lr <= 0.0) throw ConfigError("inversion: step size must be positive");
        if (mean_latent_samples < 1)
            throw ConfigError("inversion: mean_latent_samples must be >= 1");
        if (weights.l2 < 0.0 || weights.lpips < 0.0 || weights.id < 0.0 ||
            weights.depth < 0.0)
            throw ConfigError("inversion: loss weights must be >= 0");
    }
};

struct LossBreakdown {
    double total = 0.0;
    double l2 = 0.0;
    double lpips = 0.0;
    double id = 0.0;
    double depth = 0.0;
};

struct InversionStep {
    int step = 0;
    LossBreakdown loss;
    double yaw_deg = 0.0;
    double pitch_deg = 0.0;
};

struct InversionResult {
    LatentCode w3d;
    CameraPose pose;
    LossBreakdown loss;
    int steps = 0;
};

using InversionStepFn = std::function<void(const InversionStep&)>;

/// Average latent over `samples` mapped standard-normal draws.
LatentCode mean_latent(const Generator3D& g, SeededRng& rng, int samples = 10000);

/// Pose of a style image, estimated from a photo-realized re-render:
/// the high layers of its 2D latent are remixed toward mapped noise and
/// the result is rendered with g2d before the estimator runs.
CameraPose init_pose_from_photo(const ImageBatch& style, const LatentCode& w2d,
                                SeededRng& rng, const InversionConfig& cfg,
                                const Generator2D& g2d, const PoseEstimator& est);

/// Weighted sum of pixel, perceptual, identity, and depth distances,
/// averaged over the batch. When `grads` is non-null it receives
/// d(total)/d(gen[i]) for every batch entry.
LossBreakdown composite_inversion_loss(const ImageBatch& gen, const ImageBatch& target,
                                       const PerceptualOracle& oracle,
                                       const InversionWeights& weights,
                                       std::vector<Image>* grads = nullptr);

/// Optimize (w3d, yaw, pitch) against the style image with the generator
/// frozen, starting from the mean latent and `init_pose`. Returns the
/// best-loss iterate. Throws DivergenceError when the loss goes non-finite.
InversionResult invert_artistic(const ImageBatch& style, const CameraPose& init_pose,
                                const InversionConfig& cfg, const Generator3D& g3d,
                                const PerceptualOracle& oracle, SeededRng& rng,
                                const InversionStepFn& on_step = nullptr);

}  // namespace stylefuse
