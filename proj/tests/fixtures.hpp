// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared backend instances and sampling helpers. The default backend is
// expensive to build (the embedder projection alone is ~50 MB), so every
// test file draws from the same lazily built instance.

#pragma once

#include "stylefuse/toy_backend.hpp"

namespace testsupport {

inline const stylefuse::Backend& shared_backend() {
    static stylefuse::Backend b = stylefuse::make_toy_backend();
    return b;
}

inline const stylefuse::ToyBackendConfig& shared_config() {
    static stylefuse::ToyBackendConfig cfg;
    return cfg;
}

/// Small-resolution config for finite-difference tests where the default
/// backend would dominate the runtime.
inline stylefuse::ToyBackendConfig small_config() {
    stylefuse::ToyBackendConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.features = 8;
    cfg.latent_width = 24;
    cfg.embed_width = 64;
    cfg.id_width = 16;
    return cfg;
}

inline stylefuse::LatentCode sample_latent(const stylefuse::Generator3D& g,
                                           stylefuse::SeededRng& rng) {
    Eigen::VectorXd z(g.latent_width());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return g.map_noise(z);
}

inline stylefuse::Image random_image(stylefuse::SeededRng& rng, int h, int w) {
    stylefuse::Image img(h, w, 3);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data[i] = rng.uniform();
    return img;
}

}  // namespace testsupport
