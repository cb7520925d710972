// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 stylefuse authors

#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stylefuse/camera.hpp"
#include "stylefuse/core.hpp"
#include "stylefuse/embedding.hpp"
#include "stylefuse/image.hpp"
#include "stylefuse/latent.hpp"

namespace stylefuse {

using ImageBatch = std::vector<Image>;

// Gradient accumulator for a single render. Latent and pose grads are always
// filled; parameter grads only for the modules listed in the backward call.
struct GeneratorGrads {
    LatentCode::Matrix d_latent;
    double d_yaw = 0.0;
    double d_pitch = 0.0;
    std::map<std::string, Eigen::VectorXd> d_params;

    void reset(int layers, int width, const std::vector<std::string>& modules,
               const std::vector<int>& module_sizes) {
        d_latent = LatentCode::Matrix::Zero(layers, width);
        d_yaw = 0.0;
        d_pitch = 0.0;
        d_params.clear();
        for (std::size_t i = 0; i < modules.size(); ++i)
            d_params[modules[i]] = Eigen::VectorXd::Zero(module_sizes[i]);
    }
};

class Generator3D {
public:
    virtual ~Generator3D() = default;

    virtual int latent_layers() const = 0;
    virtual int latent_width() const = 0;
    virtual int image_height() const = 0;
    virtual int image_width() const = 0;

    // Fixed order: {synthesis, mapping, superresolution, decoder}.
    virtual std::vector<std::string> module_names() const = 0;
    virtual const Eigen::VectorXd& module_params(const std::string& name) const = 0;
    virtual Eigen::VectorXd& module_params_mut(const std::string& name) = 0;

    virtual Image render(const LatentCode& w, const CameraPose& pose) const = 0;

    // Backpropagates dLoss/dImage through the render. Parameter gradients are
    // accumulated only for `param_modules`; latent and pose grads always.
    virtual void render_backward(const LatentCode& w, const CameraPose& pose,
                                 const Image& upstream, GeneratorGrads& grads,
                                 const std::vector<std::string>& param_modules) const = 0;

    virtual LatentCode map_noise(const Eigen::VectorXd& z) const = 0;
    // Chains dLoss/dMappedLatent into mapping-parameter gradients.
    virtual void map_noise_backward(const Eigen::VectorXd& z,
                                    const LatentCode::Matrix& upstream,
                                    Eigen::VectorXd& d_mapping_params) const = 0;

    virtual std::unique_ptr<Generator3D> clone() const = 0;
};

class Generator2D {
public:
    virtual ~Generator2D() = default;

    virtual int latent_layers() const = 0;
    virtual int latent_width() const = 0;
    virtual int image_height() const = 0;
    virtual int image_width() const = 0;

    virtual Image render(const LatentCode& w) const = 0;
    virtual LatentCode map_noise(const Eigen::VectorXd& z) const = 0;

    virtual bool can_encode() const { return false; }
    virtual LatentCode encode(const Image&) const {
        throw ConfigError("this 2D generator has no built-in inverter");
    }
};

class JointEmbedder {
public:
    virtual ~JointEmbedder() = default;

    virtual int width() const = 0;
    virtual Embedding embed_image(const Image& image) const = 0;
    virtual Embedding embed_text(const std::string& prompt) const = 0;
    // Chain rule through the image encoder: grad += J^T * upstream.
    virtual void embed_image_backward(const Image& image,
                                      const Eigen::VectorXd& upstream,
                                      Image& grad) const = 0;
    virtual std::uint64_t param_hash() const = 0;
};

class PoseEstimator {
public:
    virtual ~PoseEstimator() = default;
    // Throws PoseEstimationError when no pose can be recovered.
    virtual CameraPose estimate(const Image& image) const = 0;
};

class PerceptualOracle {
public:
    virtual ~PerceptualOracle() = default;

    virtual double pixel_l2(const Image& a, const Image& b) const = 0;
    virtual double perceptual(const Image& a, const Image& b) const = 0;
    virtual double identity(const Image& a, const Image& b) const = 0;
    virtual double depth(const Image& a, const Image& b) const = 0;

    // Each *_grad returns the value and accumulates dValue/dA into grad_a.
    virtual double pixel_l2_grad(const Image& a, const Image& b, Image& grad_a) const = 0;
    virtual double perceptual_grad(const Image& a, const Image& b, Image& grad_a) const = 0;
    virtual double identity_grad(const Image& a, const Image& b, Image& grad_a) const = 0;
    virtual double depth_grad(const Image& a, const Image& b, Image& grad_a) const = 0;
};

// Mutable view over a subset of a generator's parameter blocks. Optimizer
// steps through the view leave every unselected block bit-identical.
struct ParamView {
    std::vector<std::string> names;
    std::vector<Eigen::VectorXd*> blocks;

    int total_size() const {
        int n = 0;
        for (const auto* b : blocks) n += static_cast<int>(b->size());
        return n;
    }
};

inline ParamView select_submodule_params(Generator3D& g, const std::set<std::string>& names) {
    const auto known = g.module_names();
    for (const auto& n : names) {
        if (std::find(known.begin(), known.end(), n) == known.end())
            throw ConfigError("unknown submodule '" + n + "'");
    }
    ParamView view;
    for (const auto& n : known) {
        if (names.count(n)) {
            view.names.push_back(n);
            view.blocks.push_back(&g.module_params_mut(n));
        }
    }
    return view;
}

inline std::uint64_t param_hash(const Generator3D& g) {
    std::uint64_t h = kFnvOffset;
    for (const auto& name : g.module_names()) {
        h = fnv1a64(name.data(), name.size(), h);
        const auto& p = g.module_params(name);
        h = hash_doubles(p.data(), static_cast<std::size_t>(p.size()), h);
    }
    return h;
}

inline std::uint64_t module_hash(const Generator3D& g, const std::string& name) {
    const auto& p = g.module_params(name);
    return hash_doubles(p.data(), static_cast<std::size_t>(p.size()));
}

struct Backend {
    std::unique_ptr<Generator3D> g3d;
    std::unique_ptr<Generator2D> g2d;
    std::shared_ptr<JointEmbedder> embedder;
    std::unique_ptr<PoseEstimator> pose_estimator;
    std::unique_ptr<PerceptualOracle> oracle;
};

}  // namespace stylefuse
