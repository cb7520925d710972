// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <span>
#include <string>

#include "stylefuse/backend.hpp"
#include "stylefuse/camera.hpp"
#include "stylefuse/latent.hpp"
#include "stylefuse/optimizer.hpp"

namespace stylefuse {

struct StylizeConfig {
    double beta = 0.1;
    // Draw beta ~ Uniform(0, 0.2) per sample instead of the fixed value.
    bool sample_beta = false;
    LayerRange perturb_range_3d{9, 13};
    int batch = 2;
    std::set<std::string> trainable{"synthesis", "superresolution", "decoder"};
    // Swap the perceptual objective for plain pixel L2.
    bool use_pixel_loss = false;

    void validate() const {
        // beta = 1 is a test hook: mixing weight one reproduces the base
        // latent exactly.
        if (!((beta >= 0.0 && beta <= 0.2) || beta == 1.0))
            throw ConfigError("stylizer: beta must lie in [0, 0.2]");
        if (batch < 1) throw ConfigError("stylizer: batch must be >= 1");
        if (trainable.empty())
            throw ConfigError("stylizer: no trainable submodules selected");
    }
};

/// One perturbed-latent training pair: the remixed latent, the pose it was
/// rendered under, and the renders themselves.
struct PairedSample {
    LatentCode w3d;
    CameraPose pose;
    ImageBatch images;
};

/// Perturb the stylization-relevant layers of w3d toward mapped noise and
/// render the result. Fresh noise per call; the paired dataset is streamed,
/// never materialized.
PairedSample make_paired_sample(const LatentCode& w3d, const CameraPose& pose,
                                SeededRng& rng, const StylizeConfig& cfg,
                                const Generator3D& g3d_s);

/// One fine-tuning step of g3d_s toward the style image on a paired sample.
/// Only the configured submodules change. Returns the pre-step loss.
double apt_step(const ImageBatch& style, const PairedSample& sample,
                Generator3D& g3d_s, const PerceptualOracle& oracle,
                AdamOptimizer& opt, const StylizeConfig& cfg);

/// Batched variant: one optimizer step with the loss and gradients averaged
/// over every render of every sample.
double apt_step(const ImageBatch& style, std::span<const PairedSample> samples,
                Generator3D& g3d_s, const PerceptualOracle& oracle,
                AdamOptimizer& opt, const StylizeConfig& cfg);

}  // namespace stylefuse
