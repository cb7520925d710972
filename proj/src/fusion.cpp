// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include "stylefuse/fusion.hpp"

namespace stylefuse {

TextDirection text_direction(const JointEmbedder& embedder, const FusionConfig& cfg) {
    cfg.validate();
    TextDirection out;
    out.target = embedder.embed_text(cfg.target_text);
    out.source = embedder.embed_text(cfg.source_text);
    out.delta = direction(out.source, out.target);
    if (out.delta.norm() < kDirectionNormFloor)
        throw DegenerateDirectionError(
            "text_direction: target and source prompts coincide");
    return out;
}

ViewSet build_views(const LatentCode& w3d, SeededRng& rng, const FusionConfig& cfg,
                    const Generator3D& g_s, const Generator3D& g_t,
                    const Generator3D& g_o) {
    cfg.validate();
    if (g_s.latent_layers() != g_t.latent_layers() ||
        g_s.latent_layers() != g_o.latent_layers() ||
        g_s.latent_width() != g_t.latent_width() ||
        g_s.latent_width() != g_o.latent_width())
        throw DimensionError("build_views: generators disagree on latent shape");

    ViewSet out;
    out.poses = sample_multiview_poses(rng, cfg.n_views, cfg.yaw_range,
                                       cfg.pitch_range, cfg.camera);
    const Image canonical = g_o.render(w3d, canonical_pose(cfg.camera));
    for (const auto& pose : out.poses) {
        out.style.push_back(g_s.render(w3d, pose));
        out.train.push_back(g_t.render(w3d, pose));
        out.source.push_back(canonical);
    }
    return out;
}

double measure_distance(const ViewSet& views, const JointEmbedder& embedder,
                        const FusionConfig& cfg) {
    if (views.style.empty() || views.style.size() != views.source.size())
        throw DimensionError("measure_distance: malformed view set");
    std::vector<Embedding> style_embs, source_embs;
    for (std::size_t i = 0; i < views.style.size(); ++i) {
        style_embs.push_back(embedder.embed_image(views.style[i]));
        source_embs.push_back(embedder.embed_image(views.source[i]));
    }
    const std::span<const Embedding> a(style_embs), b(source_embs);
    return cfg.cos_reduction ? stylization_distance_cos(a, b)
                             : stylization_distance(a, b);
}

int gamma_from_draw(double distance, int draw, const FusionConfig& cfg) {
    if (distance <= cfg.tau) return 0;
    return draw <= cfg.xi ? 0 : 1;
}

GammaDraw select_gamma(double distance, SeededRng& rng, const FusionConfig& cfg) {
    cfg.validate();
    if (distance < 0.0) throw RangeError("select_gamma: negative distance");
    GammaDraw out;
    if (distance > cfg.tau) out.draw = rng.uniform_int(1, 100);
    out.gamma = gamma_from_draw(distance, out.draw, cfg);
    return out;
}

FusionState ite_loss(const ViewSet& views, const TextDirection& text, int gamma,
                     const JointEmbedder& embedder,
                     std::vector<Image>* train_grads) {
    if (gamma != 0 && gamma != 1)
        throw RangeError("ite_loss: gamma must be 0 or 1");
    const std::size_t n = views.train.size();
    if (n == 0 || views.style.size() != n || views.source.size() != n)
        throw DimensionError("ite_loss: malformed view set");

    FusionState state;
    state.gamma = gamma;
    if (train_grads) train_grads->assign(n, Image());

    const double inv_n = 1.0 / static_cast<double>(n);
    try {
        for (std::size_t m = 0; m < n; ++m) {
            const Embedding e_train = embedder.embed_image(views.train[m]);
            const Embedding e_style = embedder.embed_image(views.style[m]);
            const Embedding e_source = embedder.embed_image(views.source[m]);
            const Embedding d_it = direction(e_source, e_train);
            const Embedding d_i = direction(e_source, e_style);

            Embedding g_image, g_text;
            state.loss_image +=
                inv_n * cosine_direction_loss(d_it, d_i,
                                              train_grads ? &g_image : nullptr);
            state.loss_text +=
                inv_n * cosine_direction_loss(d_it, text.delta,
                                              train_grads ? &g_text : nullptr);
            if (train_grads) {
                const Eigen::VectorXd upstream =
                    inv_n * (gamma == 1 ? g_image.values : g_text.values);
                (*train_grads)[m] =
                    Image(views.train[m].height, views.train[m].width,
                          views.train[m].channels);
                embedder.embed_image_backward(views.train[m], upstream,
                                              (*train_grads)[m]);
            }
        }
    } catch (const DegenerateDirectionError&) {
        state.skipped = true;
        state.loss_image = 0.0;
        state.loss_text = 0.0;
        state.loss_total = 0.0;
        if (train_grads) train_grads->clear();
        return state;
    }
    state.loss_total =
        gamma * state.loss_image + (1 - gamma) * state.loss_text;
    return state;
}

}  // namespace stylefuse
