// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include "stylefuse/stylizer.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace stylefuse {

PairedSample make_paired_sample(const LatentCode& w3d, const CameraPose& pose,
                                SeededRng& rng, const StylizeConfig& cfg,
                                const Generator3D& g3d_s) {
    cfg.validate();
    pose.validate();
    const double beta =
        cfg.sample_beta ? rng.uniform(0.0, 0.2) : cfg.beta;
    Eigen::VectorXd z(g3d_s.latent_width());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();

    PairedSample out;
    out.w3d = mix_latent(w3d, g3d_s.map_noise(z), beta, cfg.perturb_range_3d);
    out.pose = pose;
    out.images.push_back(g3d_s.render(out.w3d, pose));
    return out;
}

double apt_step(const ImageBatch& style, const PairedSample& sample,
                Generator3D& g3d_s, const PerceptualOracle& oracle,
                AdamOptimizer& opt, const StylizeConfig& cfg) {
    return apt_step(style, std::span<const PairedSample>(&sample, 1), g3d_s,
                    oracle, opt, cfg);
}

double apt_step(const ImageBatch& style, std::span<const PairedSample> samples,
                Generator3D& g3d_s, const PerceptualOracle& oracle,
                AdamOptimizer& opt, const StylizeConfig& cfg) {
    cfg.validate();
    std::size_t total = 0;
    for (const auto& s : samples) total += s.images.size();
    if (style.empty() || total == 0)
        throw DimensionError("apt_step: empty style or sample batch");

    ParamView view = select_submodule_params(g3d_s, cfg.trainable);

    GeneratorGrads grads;
    std::vector<int> sizes;
    for (const auto* blk : view.blocks) sizes.push_back(static_cast<int>(blk->size()));
    grads.reset(g3d_s.latent_layers(), g3d_s.latent_width(), view.names, sizes);

    const double inv_n = 1.0 / static_cast<double>(total);
    double loss = 0.0;
    for (const auto& sample : samples) {
        for (std::size_t i = 0; i < sample.images.size(); ++i) {
            const Image& gen = sample.images[i];
            const Image& target = style[i % style.size()];
            require_same_shape(gen, target, "apt_step");

            Image up(gen.height, gen.width, gen.channels);
            loss += inv_n * (cfg.use_pixel_loss
                                 ? oracle.pixel_l2_grad(gen, target, up)
                                 : oracle.perceptual_grad(gen, target, up));
            up.data *= inv_n;
            g3d_s.render_backward(sample.w3d, sample.pose, up, grads, view.names);
        }
    }
    if (!std::isfinite(loss))
        throw DivergenceError("apt_step: non-finite loss",
                              opt.step_count("apt/" + view.names.front()));

    for (std::size_t i = 0; i < view.names.size(); ++i)
        opt.step("apt/" + view.names[i], *view.blocks[i], grads.d_params[view.names[i]]);
    return loss;
}

}  // namespace stylefuse
