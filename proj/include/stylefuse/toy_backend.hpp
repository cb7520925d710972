// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 stylefuse authors

#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stylefuse/backend.hpp"

namespace stylefuse {

// Planar pixel array sharing the Image storage order.
using PixelPlane = Image::Plane;

// Desk-scale stand-in for the pretrained stack. Every component is seeded,
// deterministic, and differentiable where the training loop needs gradients.
struct ToyBackendConfig {
    std::uint64_t seed = 1234;
    int height = 64;
    int width = 64;
    int features = 16;
    int latent_layers = 14;
    int latent_width = 512;
    int latent2d_layers = 18;
    int embed_width = 512;
    int id_width = 64;

    double map_scale = 0.25;
    double map_bias = 0.3;
    double map2d_scale = 0.02;
    double synth_gain = 1.0;
    double bump_sigma = 0.32;
    // Image-plane shift per degree of yaw / pitch.
    double yaw_shift = 0.01;
    double pitch_shift = 0.01;
    // Pattern angular rates: radial frequency is drawn from
    // [freq_min, freq_max] so patterns stay nearly orthogonal to the pose
    // cue, while the horizontal rate is capped at rate_x_max to keep the
    // image change monotone in |yaw| over the pose range.
    double rate_x_max = 6.0;
    double freq_min = 10.0;
    double freq_max = 16.0;
    double pose_score_min = 0.3;

    CameraConventions camera;

    void validate() const;
};

class ToyGenerator3D final : public Generator3D {
public:
    explicit ToyGenerator3D(const ToyBackendConfig& cfg);

    int latent_layers() const override { return cfg_.latent_layers; }
    int latent_width() const override { return cfg_.latent_width; }
    int image_height() const override { return cfg_.height; }
    int image_width() const override { return cfg_.width; }

    std::vector<std::string> module_names() const override;
    const Eigen::VectorXd& module_params(const std::string& name) const override;
    Eigen::VectorXd& module_params_mut(const std::string& name) override;

    Image render(const LatentCode& w, const CameraPose& pose) const override;
    void render_backward(const LatentCode& w, const CameraPose& pose,
                         const Image& upstream, GeneratorGrads& grads,
                         const std::vector<std::string>& param_modules) const override;

    LatentCode map_noise(const Eigen::VectorXd& z) const override;
    void map_noise_backward(const Eigen::VectorXd& z, const LatentCode::Matrix& upstream,
                            Eigen::VectorXd& d_mapping_params) const override;

    std::unique_ptr<Generator3D> clone() const override;

    const ToyBackendConfig& config() const { return cfg_; }

private:
    void check_latent(const LatentCode& w) const;
    void warp_grids(const CameraPose& pose, PixelPlane& u, PixelPlane& v) const;
    PixelPlane bump(const PixelPlane& u, const PixelPlane& v) const;
    Eigen::VectorXd coefficients(const LatentCode& w) const;

    ToyBackendConfig cfg_;
    // Frozen pattern bank: per-feature angular rates and phase.
    Eigen::VectorXd rate_x_, rate_y_, phase_;
    // Normalized pixel center coordinates.
    PixelPlane grid_x_, grid_y_;

    // Trainable blocks. synthesis = [vec(S) ; s0], mapping = [vec(scale) ; vec(bias)],
    // superresolution = [gain ; offset], decoder = [vec(Dec) ; bias].
    Eigen::VectorXd synthesis_, mapping_, superres_, decoder_;
};

class ToyGenerator2D final : public Generator2D {
public:
    explicit ToyGenerator2D(const ToyBackendConfig& cfg);

    int latent_layers() const override { return cfg_.latent2d_layers; }
    int latent_width() const override { return cfg_.latent_width; }
    int image_height() const override { return cfg_.height; }
    int image_width() const override { return cfg_.width; }

    Image render(const LatentCode& w) const override;
    LatentCode map_noise(const Eigen::VectorXd& z) const override;

    bool can_encode() const override { return true; }
    LatentCode encode(const Image& image) const override;

private:
    int coeff_count() const { return cfg_.latent2d_layers * cfg_.latent_width / 3; }

    ToyBackendConfig cfg_;
    Eigen::MatrixXd dct_;                   // orthonormal DCT-II matrix, size N x N
    std::vector<std::pair<int, int>> zig_;  // zigzag rank -> (p, q)
};

class ToyJointEmbedder final : public JointEmbedder {
public:
    explicit ToyJointEmbedder(const ToyBackendConfig& cfg);

    int width() const override { return cfg_.embed_width; }
    Embedding embed_image(const Image& image) const override;
    Embedding embed_text(const std::string& prompt) const override;
    void embed_image_backward(const Image& image, const Eigen::VectorXd& upstream,
                              Image& grad) const override;
    std::uint64_t param_hash() const override;

    static std::vector<std::string> tokenize(const std::string& prompt);
    const std::vector<std::string>& vocabulary() const { return vocab_; }

private:
    ToyBackendConfig cfg_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> proj_;
    std::vector<std::string> vocab_;
    Eigen::MatrixXd token_vectors_;  // embed_width x vocab size, unit columns

    // Memo for repeated image embeds (optimization targets embed the same
    // style image every step). Keyed by content hash; not thread-safe, in
    // line with the single-process-per-run concurrency model.
    mutable std::vector<std::pair<std::uint64_t, Embedding>> embed_cache_;
};

class ToyPoseEstimator final : public PoseEstimator {
public:
    explicit ToyPoseEstimator(const ToyBackendConfig& cfg);
    CameraPose estimate(const Image& image) const override;

private:
    double score(const PixelPlane& centered_luma, double yaw, double pitch) const;

    ToyBackendConfig cfg_;
    Eigen::ArrayXd px_x_, px_y_;  // normalized pixel centers per axis
};

class ToyPerceptualOracle final : public PerceptualOracle {
public:
    ToyPerceptualOracle(const ToyBackendConfig& cfg,
                        std::shared_ptr<const JointEmbedder> embedder);

    double pixel_l2(const Image& a, const Image& b) const override;
    double perceptual(const Image& a, const Image& b) const override;
    double identity(const Image& a, const Image& b) const override;
    double depth(const Image& a, const Image& b) const override;

    double pixel_l2_grad(const Image& a, const Image& b, Image& grad_a) const override;
    double perceptual_grad(const Image& a, const Image& b, Image& grad_a) const override;
    double identity_grad(const Image& a, const Image& b, Image& grad_a) const override;
    double depth_grad(const Image& a, const Image& b, Image& grad_a) const override;

private:
    Eigen::VectorXd id_features(const Image& a) const;
    PixelPlane depth_map(const Image& a) const;

    ToyBackendConfig cfg_;
    std::shared_ptr<const JointEmbedder> embedder_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> id_proj_;
};

Backend make_toy_backend(const ToyBackendConfig& cfg = {});

// Shared 3x3 binomial blur with clamp-to-edge padding; adjoint is exact.
PixelPlane blur3(const PixelPlane& in);
PixelPlane blur3_adjoint(const PixelPlane& upstream);

}  // namespace stylefuse
