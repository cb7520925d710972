// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stylefuse/backend.hpp"
#include "stylefuse/camera.hpp"
#include "stylefuse/embedding.hpp"
#include "stylefuse/latent.hpp"

namespace stylefuse {

struct FusionConfig {
    double tau = 0.7;
    int xi = 50;
    std::string target_text;
    std::string source_text = "photo";
    int n_views = 3;
    std::pair<double, double> yaw_range{-50.0, 50.0};
    std::pair<double, double> pitch_range{-30.0, 30.0};
    // Measure D as mean (1 - cos) per view instead of mean L2 distance.
    bool cos_reduction = false;
    CameraConventions camera;

    void validate() const {
        if (!(tau > 0.0 && tau < 2.0))
            throw ConfigError("fusion: tau must lie in (0, 2)");
        if (xi < 1 || xi > 100) throw ConfigError("fusion: xi must lie in [1, 100]");
        if (n_views < 1) throw ConfigError("fusion: n_views must be >= 1");
        if (target_text.empty()) throw ConfigError("fusion: target text is required");
        if (source_text.empty()) throw ConfigError("fusion: source text is required");
        if (!(yaw_range.first <= yaw_range.second) ||
            !(pitch_range.first <= pitch_range.second))
            throw ConfigError("fusion: empty pose range");
    }
};

/// One gated fusion step as logged to the run's line-delimited stream.
/// `draw` is the raw Rand(1,100) value, or -1 when the gate resolved
/// without drawing. Skipped steps carry zero losses and skipped=true.
struct FusionState {
    long epoch = 0;
    double distance = 0.0;
    int draw = -1;
    int gamma = 0;
    double loss_image = 0.0;
    double loss_text = 0.0;
    double loss_total = 0.0;
    bool skipped = false;
};

struct GammaDraw {
    int gamma = 0;
    int draw = -1;
};

/// Multi-view renders for one fusion step. Style and train share the same
/// sampled poses entry by entry; source is the canonical render broadcast.
struct ViewSet {
    std::vector<CameraPose> poses;
    ImageBatch style;
    ImageBatch train;
    ImageBatch source;
};

/// Cached text-branch direction, computed once per run.
struct TextDirection {
    Embedding target;
    Embedding source;
    Embedding delta;
};

/// Embeds both prompts and forms their difference. Throws
/// DegenerateDirectionError when the prompts collapse to the same point.
TextDirection text_direction(const JointEmbedder& embedder, const FusionConfig& cfg);

/// Renders the per-step view triples: g_s and g_t at n freshly sampled
/// poses, g_o once at the canonical pose (broadcast n times).
ViewSet build_views(const LatentCode& w3d, SeededRng& rng, const FusionConfig& cfg,
                    const Generator3D& g_s, const Generator3D& g_t,
                    const Generator3D& g_o);

/// Degree of image-guided stylization: mean embedding distance between the
/// style and source renders of a view set.
double measure_distance(const ViewSet& views, const JointEmbedder& embedder,
                        const FusionConfig& cfg);

/// Pure gate decision given an already-made draw.
int gamma_from_draw(double distance, int draw, const FusionConfig& cfg);

/// Threshold gate. Draws Rand(1,100) only when distance exceeds tau.
GammaDraw select_gamma(double distance, SeededRng& rng, const FusionConfig& cfg);

/// Branch losses for one view set. The returned state carries gamma and the
/// per-branch losses; epoch, distance, and draw are stamped by the caller.
/// When `train_grads` is non-null it receives d(L_IT)/d(train image) per
/// view; gradients flow only into the train renders.
FusionState ite_loss(const ViewSet& views, const TextDirection& text, int gamma,
                     const JointEmbedder& embedder,
                     std::vector<Image>* train_grads = nullptr);

}  // namespace stylefuse
