// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 stylefuse authors

#include "stylefuse/toy_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace stylefuse {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

// rng stream ids per component
constexpr std::uint64_t kStreamPatterns = 1;
constexpr std::uint64_t kStreamMapping = 2;
constexpr std::uint64_t kStreamSynthesis = 3;
constexpr std::uint64_t kStreamDecoder = 4;
constexpr std::uint64_t kStreamEmbedProj = 5;
constexpr std::uint64_t kStreamIdProj = 6;
constexpr std::uint64_t kStreamText = 7;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::ArrayXd axis_centers(int n) {
    Eigen::ArrayXd out(n);
    for (int i = 0; i < n; ++i) out[i] = -1.0 + 2.0 * (i + 0.5) / n;
    return out;
}

void ensure_grad_buffer(Image& grad, const Image& like) {
    if (grad.size() == 0) grad = Image(like.height, like.width, like.channels);
    require_same_shape(grad, like, "gradient buffer");
}

}  // namespace

void ToyBackendConfig::validate() const {
    if (height != width || height < 16)
        throw ConfigError("toy backend requires a square resolution of at least 16");
    if (features < 1) throw ConfigError("toy backend needs at least one feature pattern");
    if (latent_layers < 1 || latent_width < 1 || latent2d_layers < 1)
        throw ConfigError("latent dimensions must be positive");
    if ((latent2d_layers * latent_width) % 3 != 0)
        throw ConfigError("2D latent size must be divisible by 3 channels");
    if (latent2d_layers * latent_width / 3 > height * width)
        throw ConfigError("2D latent holds more coefficients than the image has");
    if (embed_width < 8 || id_width < 2)
        throw ConfigError("embedding widths too small");
    if (bump_sigma <= 0.0 || synth_gain <= 0.0)
        throw ConfigError("bump_sigma and synth_gain must be positive");
    if (freq_min <= rate_x_max || freq_max < freq_min)
        throw ConfigError("pattern frequency band must sit above rate_x_max");
}

// ---------------------------------------------------------------------------
// 3x3 binomial blur and its exact adjoint (clamp-to-edge padding)
// ---------------------------------------------------------------------------

static const double kBlur[3][3] = {{1.0 / 16, 2.0 / 16, 1.0 / 16},
                                   {2.0 / 16, 4.0 / 16, 2.0 / 16},
                                   {1.0 / 16, 2.0 / 16, 1.0 / 16}};

PixelPlane blur3(const PixelPlane& in) {
    const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
    PixelPlane out(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int di = -1; di <= 1; ++di) {
                const int ii = std::clamp(i + di, 0, h - 1);
                for (int dj = -1; dj <= 1; ++dj) {
                    const int jj = std::clamp(j + dj, 0, w - 1);
                    acc += kBlur[di + 1][dj + 1] * in(ii, jj);
                }
            }
            out(i, j) = acc;
        }
    }
    return out;
}

PixelPlane blur3_adjoint(const PixelPlane& upstream) {
    const int h = static_cast<int>(upstream.rows()), w = static_cast<int>(upstream.cols());
    PixelPlane out = PixelPlane::Zero(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double up = upstream(i, j);
            for (int di = -1; di <= 1; ++di) {
                const int ii = std::clamp(i + di, 0, h - 1);
                for (int dj = -1; dj <= 1; ++dj) {
                    const int jj = std::clamp(j + dj, 0, w - 1);
                    out(ii, jj) += kBlur[di + 1][dj + 1] * up;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ToyGenerator3D
// ---------------------------------------------------------------------------

ToyGenerator3D::ToyGenerator3D(const ToyBackendConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int F = cfg_.features;
    const int L = cfg_.latent_layers, K = cfg_.latent_width;
    const int LK = L * K;

    SeededRng master(cfg_.seed);

    SeededRng pat = master.fork(kStreamPatterns);
    rate_x_.resize(F);
    rate_y_.resize(F);
    phase_.resize(F);
    for (int f = 0; f < F; ++f) {
        rate_x_[f] = pat.uniform(-cfg_.rate_x_max, cfg_.rate_x_max);
        const double omega = pat.uniform(cfg_.freq_min, cfg_.freq_max);
        const double mag = std::sqrt(omega * omega - rate_x_[f] * rate_x_[f]);
        rate_y_[f] = (pat.uniform() < 0.5) ? -mag : mag;
        phase_[f] = pat.uniform(0.0, kTwoPi);
    }

    const Eigen::ArrayXd xs = axis_centers(cfg_.width);
    const Eigen::ArrayXd ys = axis_centers(cfg_.height);
    grid_x_.resize(cfg_.height, cfg_.width);
    grid_y_.resize(cfg_.height, cfg_.width);
    for (int i = 0; i < cfg_.height; ++i)
        for (int j = 0; j < cfg_.width; ++j) {
            grid_x_(i, j) = xs[j];
            grid_y_(i, j) = ys[i];
        }

    SeededRng mrng = master.fork(kStreamMapping);
    mapping_.resize(2 * LK);
    for (int i = 0; i < LK; ++i)
        mapping_[i] = cfg_.map_scale * (1.0 + 0.1 * mrng.normal());
    for (int i = 0; i < LK; ++i)
        mapping_[LK + i] = cfg_.map_bias * mrng.normal();

    SeededRng srng = master.fork(kStreamSynthesis);
    synthesis_.resize(F * LK + F);
    const double sscale = cfg_.synth_gain / std::sqrt(static_cast<double>(LK));
    for (int i = 0; i < F * LK; ++i) synthesis_[i] = sscale * srng.normal();
    for (int f = 0; f < F; ++f) synthesis_[F * LK + f] = 0.0;

    SeededRng drng = master.fork(kStreamDecoder);
    decoder_.resize(3 * (F + 1) + 3);
    for (int c = 0; c < 3; ++c) {
        for (int f = 0; f < F; ++f) decoder_[c * (F + 1) + f] = 0.2 * drng.normal();
        decoder_[c * (F + 1) + F] = 0.85 + 0.05 * c;  // bright pose-cue channel
    }
    for (int c = 0; c < 3; ++c) decoder_[3 * (F + 1) + c] = 0.0;

    superres_.resize(6);
    superres_ << 2.2, 2.0, 1.8, 0.05, 0.0, -0.05;
}

std::vector<std::string> ToyGenerator3D::module_names() const {
    return {"synthesis", "mapping", "superresolution", "decoder"};
}

const Eigen::VectorXd& ToyGenerator3D::module_params(const std::string& name) const {
    if (name == "synthesis") return synthesis_;
    if (name == "mapping") return mapping_;
    if (name == "superresolution") return superres_;
    if (name == "decoder") return decoder_;
    throw ConfigError("unknown submodule '" + name + "'");
}

Eigen::VectorXd& ToyGenerator3D::module_params_mut(const std::string& name) {
    return const_cast<Eigen::VectorXd&>(
        static_cast<const ToyGenerator3D*>(this)->module_params(name));
}

void ToyGenerator3D::check_latent(const LatentCode& w) const {
    w.validate();
    if (w.layers() != cfg_.latent_layers || w.width() != cfg_.latent_width)
        throw DimensionError("ToyGenerator3D: latent must be " +
                             std::to_string(cfg_.latent_layers) + "x" +
                             std::to_string(cfg_.latent_width));
}

void ToyGenerator3D::warp_grids(const CameraPose& pose, PixelPlane& u, PixelPlane& v) const {
    u = grid_x_ + cfg_.yaw_shift * pose.yaw_deg();
    v = grid_y_ + cfg_.pitch_shift * pose.pitch_deg();
}

PixelPlane ToyGenerator3D::bump(const PixelPlane& u, const PixelPlane& v) const {
    const double inv2s2 = 1.0 / (2.0 * cfg_.bump_sigma * cfg_.bump_sigma);
    return (-(u.square() + v.square()) * inv2s2).exp();
}

Eigen::VectorXd ToyGenerator3D::coefficients(const LatentCode& w) const {
    const int F = cfg_.features;
    const int LK = cfg_.latent_layers * cfg_.latent_width;
    Eigen::Map<const RowMat> S(synthesis_.data(), F, LK);
    Eigen::Map<const Eigen::VectorXd> s0(synthesis_.data() + F * LK, F);
    Eigen::Map<const Eigen::VectorXd> wv(w.values.data(), LK);
    return S * wv + s0;
}

Image ToyGenerator3D::render(const LatentCode& w, const CameraPose& pose) const {
    check_latent(w);
    pose.validate();
    const int F = cfg_.features;
    const int H = cfg_.height, W = cfg_.width;

    PixelPlane u, v;
    warp_grids(pose, u, v);
    const Eigen::VectorXd coef = coefficients(w);
    const PixelPlane psi = bump(u, v);

    Eigen::Map<const RowMat> dec(decoder_.data(), 3, F + 1);
    Eigen::Map<const Eigen::VectorXd> dbias(decoder_.data() + 3 * (F + 1), 3);
    Eigen::Map<const Eigen::VectorXd> gain(superres_.data(), 3);
    Eigen::Map<const Eigen::VectorXd> offset(superres_.data() + 3, 3);

    std::vector<PixelPlane> raw(3);
    for (int c = 0; c < 3; ++c)
        raw[c] = PixelPlane::Constant(H, W, dbias[c]) + dec(c, F) * psi;
    for (int f = 0; f < F; ++f) {
        const PixelPlane pat = (rate_x_[f] * u + rate_y_[f] * v + phase_[f]).cos();
        for (int c = 0; c < 3; ++c) raw[c] += (dec(c, f) * coef[f]) * pat;
    }

    Image out(H, W, 3);
    for (int c = 0; c < 3; ++c) {
        const PixelPlane b = blur3(raw[c]);
        out.plane(c) = ((-(gain[c] * b + offset[c])).exp() + 1.0).inverse();
    }
    return out;
}

void ToyGenerator3D::render_backward(const LatentCode& w, const CameraPose& pose,
                                     const Image& upstream, GeneratorGrads& grads,
                                     const std::vector<std::string>& param_modules) const {
    check_latent(w);
    pose.validate();
    const int F = cfg_.features;
    const int H = cfg_.height, W = cfg_.width;
    const int LK = cfg_.latent_layers * cfg_.latent_width;
    if (upstream.height != H || upstream.width != W || upstream.channels != 3)
        throw DimensionError("render_backward: upstream shape mismatch");

    const bool want_synth = std::count(param_modules.begin(), param_modules.end(), "synthesis");
    const bool want_sr = std::count(param_modules.begin(), param_modules.end(), "superresolution");
    const bool want_dec = std::count(param_modules.begin(), param_modules.end(), "decoder");
    for (const auto& m : param_modules) {
        if (!grads.d_params.count(m))
            grads.d_params[m] = Eigen::VectorXd::Zero(module_params(m).size());
        if (grads.d_params[m].size() != module_params(m).size())
            throw DimensionError("render_backward: gradient block size mismatch for " + m);
    }
    if (grads.d_latent.rows() != cfg_.latent_layers || grads.d_latent.cols() != cfg_.latent_width)
        grads.d_latent = Eigen::MatrixXd::Zero(cfg_.latent_layers, cfg_.latent_width);

    // Recompute forward intermediates.
    PixelPlane u, v;
    warp_grids(pose, u, v);
    const Eigen::VectorXd coef = coefficients(w);
    const PixelPlane psi = bump(u, v);

    Eigen::Map<const RowMat> dec(decoder_.data(), 3, F + 1);
    Eigen::Map<const Eigen::VectorXd> dbias(decoder_.data() + 3 * (F + 1), 3);
    Eigen::Map<const Eigen::VectorXd> gain(superres_.data(), 3);
    Eigen::Map<const Eigen::VectorXd> offset(superres_.data() + 3, 3);

    std::vector<PixelPlane> raw(3);
    for (int c = 0; c < 3; ++c)
        raw[c] = PixelPlane::Constant(H, W, dbias[c]) + dec(c, F) * psi;
    std::vector<PixelPlane> pats(F);
    for (int f = 0; f < F; ++f) {
        pats[f] = (rate_x_[f] * u + rate_y_[f] * v + phase_[f]).cos();
        for (int c = 0; c < 3; ++c) raw[c] += (dec(c, f) * coef[f]) * pats[f];
    }

    // Backward through sigmoid, affine, blur.
    std::vector<PixelPlane> draw(3);
    for (int c = 0; c < 3; ++c) {
        const PixelPlane b = blur3(raw[c]);
        const PixelPlane o = ((-(gain[c] * b + offset[c])).exp() + 1.0).inverse();
        const PixelPlane a = upstream.plane(c) * o * (1.0 - o);
        if (want_sr) {
            auto& g = grads.d_params["superresolution"];
            g[c] += (a * b).sum();
            g[3 + c] += a.sum();
        }
        draw[c] = blur3_adjoint(gain[c] * a);
    }

    Eigen::VectorXd* ddec = want_dec ? &grads.d_params["decoder"] : nullptr;
    if (ddec) {
        for (int c = 0; c < 3; ++c) {
            (*ddec)[c * (F + 1) + F] += (draw[c] * psi).sum();
            (*ddec)[3 * (F + 1) + c] += draw[c].sum();
        }
    }

    // Pose gradient via the latent-independent cue.
    const double inv_s2 = 1.0 / (cfg_.bump_sigma * cfg_.bump_sigma);
    const PixelPlane bsum =
        dec(0, F) * draw[0] + dec(1, F) * draw[1] + dec(2, F) * draw[2];
    grads.d_yaw += cfg_.yaw_shift * (bsum * psi * (-u) * inv_s2).sum();
    grads.d_pitch += cfg_.pitch_shift * (bsum * psi * (-v) * inv_s2).sum();

    Eigen::VectorXd dcoef = Eigen::VectorXd::Zero(F);
    for (int f = 0; f < F; ++f) {
        const PixelPlane dpat =
            -(rate_x_[f] * u + rate_y_[f] * v + phase_[f]).sin();
        double dots[3];
        for (int c = 0; c < 3; ++c) {
            dots[c] = (draw[c] * pats[f]).sum();
            if (ddec) (*ddec)[c * (F + 1) + f] += coef[f] * dots[c];
            dcoef[f] += dec(c, f) * dots[c];
        }
        const PixelPlane gsum =
            dec(0, f) * draw[0] + dec(1, f) * draw[1] + dec(2, f) * draw[2];
        const double dphase = coef[f] * (gsum * dpat).sum();
        grads.d_yaw += cfg_.yaw_shift * rate_x_[f] * dphase;
        grads.d_pitch += cfg_.pitch_shift * rate_y_[f] * dphase;
    }

    Eigen::Map<const RowMat> S(synthesis_.data(), F, LK);
    Eigen::Map<const Eigen::VectorXd> wv(w.values.data(), LK);
    const Eigen::VectorXd dw = S.transpose() * dcoef;
    grads.d_latent += Eigen::Map<const RowMat>(dw.data(), cfg_.latent_layers, cfg_.latent_width);

    if (want_synth) {
        auto& g = grads.d_params["synthesis"];
        Eigen::Map<RowMat> dS(g.data(), F, LK);
        dS.noalias() += dcoef * wv.transpose();
        Eigen::Map<Eigen::VectorXd>(g.data() + F * LK, F) += dcoef;
    }
}

LatentCode ToyGenerator3D::map_noise(const Eigen::VectorXd& z) const {
    if (z.size() != cfg_.latent_width)
        throw DimensionError("map_noise: z must have the latent width");
    const int L = cfg_.latent_layers, K = cfg_.latent_width;
    Eigen::Map<const RowMat> scale(mapping_.data(), L, K);
    Eigen::Map<const RowMat> bias(mapping_.data() + L * K, L, K);
    LatentCode out(L, K);
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k) out.values(l, k) = bias(l, k) + scale(l, k) * z[k];
    return out;
}

void ToyGenerator3D::map_noise_backward(const Eigen::VectorXd& z,
                                        const LatentCode::Matrix& upstream,
                                        Eigen::VectorXd& d_mapping_params) const {
    const int L = cfg_.latent_layers, K = cfg_.latent_width;
    if (z.size() != K || upstream.rows() != L || upstream.cols() != K)
        throw DimensionError("map_noise_backward: shape mismatch");
    if (d_mapping_params.size() != mapping_.size())
        d_mapping_params = Eigen::VectorXd::Zero(mapping_.size());
    Eigen::Map<RowMat> dscale(d_mapping_params.data(), L, K);
    Eigen::Map<RowMat> dbias(d_mapping_params.data() + L * K, L, K);
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k) {
            dscale(l, k) += upstream(l, k) * z[k];
            dbias(l, k) += upstream(l, k);
        }
}

std::unique_ptr<Generator3D> ToyGenerator3D::clone() const {
    return std::make_unique<ToyGenerator3D>(*this);
}

// ---------------------------------------------------------------------------
// ToyGenerator2D: truncated separable cosine-transform basis with a
// zigzag frequency ordering, so early layers hold coarse structure.
// ---------------------------------------------------------------------------

ToyGenerator2D::ToyGenerator2D(const ToyBackendConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int N = cfg_.height;
    dct_.resize(N, N);
    const double pi = 3.14159265358979323846;
    for (int p = 0; p < N; ++p) {
        const double a = (p == 0) ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
        for (int j = 0; j < N; ++j)
            dct_(p, j) = a * std::cos(pi * (j + 0.5) * p / N);
    }

    zig_.reserve(static_cast<std::size_t>(N) * N);
    for (int s = 0; s <= 2 * (N - 1); ++s) {
        if (s % 2 == 0) {
            for (int p = std::min(s, N - 1); p >= std::max(0, s - N + 1); --p)
                zig_.emplace_back(p, s - p);
        } else {
            for (int q = std::min(s, N - 1); q >= std::max(0, s - N + 1); --q)
                zig_.emplace_back(s - q, q);
        }
    }
}

Image ToyGenerator2D::render(const LatentCode& w) const {
    w.validate();
    if (w.layers() != cfg_.latent2d_layers || w.width() != cfg_.latent_width)
        throw DimensionError("ToyGenerator2D: latent must be " +
                             std::to_string(cfg_.latent2d_layers) + "x" +
                             std::to_string(cfg_.latent_width));
    const int N = cfg_.height, K = cfg_.latent_width, R = coeff_count();
    Image out(N, N, 3);
    for (int c = 0; c < 3; ++c) {
        Eigen::MatrixXd coefs = Eigen::MatrixXd::Zero(N, N);
        for (int r = 0; r < R; ++r) {
            const int slot = 3 * r + c;
            coefs(zig_[r].first, zig_[r].second) = w.values(slot / K, slot % K);
        }
        const Eigen::MatrixXd plane = dct_.transpose() * coefs * dct_;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                out(i, j, c) = std::clamp(plane(i, j), 0.0, 1.0);
    }
    return out;
}

LatentCode ToyGenerator2D::encode(const Image& image) const {
    if (image.height != cfg_.height || image.width != cfg_.width || image.channels != 3)
        throw DimensionError("ToyGenerator2D::encode: image shape mismatch");
    const int K = cfg_.latent_width, R = coeff_count();
    LatentCode out(cfg_.latent2d_layers, K);
    for (int c = 0; c < 3; ++c) {
        const Eigen::MatrixXd plane = image.plane(c).matrix();
        const Eigen::MatrixXd coefs = dct_ * plane * dct_.transpose();
        for (int r = 0; r < R; ++r) {
            const int slot = 3 * r + c;
            out.values(slot / K, slot % K) = coefs(zig_[r].first, zig_[r].second);
        }
    }
    return out;
}

LatentCode ToyGenerator2D::map_noise(const Eigen::VectorXd& z) const {
    if (z.size() != cfg_.latent_width)
        throw DimensionError("map_noise: z must have the latent width");
    LatentCode out(cfg_.latent2d_layers, cfg_.latent_width);
    for (int l = 0; l < cfg_.latent2d_layers; ++l)
        for (int k = 0; k < cfg_.latent_width; ++k)
            out.values(l, k) = cfg_.map2d_scale * z[k];
    return out;
}

// ---------------------------------------------------------------------------
// ToyJointEmbedder
// ---------------------------------------------------------------------------

namespace {

const char* kVocabulary[] = {
    "a", "an", "the", "of", "in", "with", "and", "photo", "portrait", "face",
    "person", "man", "woman", "child", "artist", "style", "art", "artistic",
    "drawing", "sketch", "painting", "paint", "oil", "watercolor", "pencil",
    "ink", "charcoal", "cartoon", "comic", "anime", "pixar", "caricature",
    "sculpture", "statue", "render", "image", "picture", "wearing", "glasses",
    "hat", "beard", "hair", "smile", "smiling", "old", "young", "happy", "sad",
    "blue", "red", "green", "golden", "dark", "bright", "pale", "colorful",
    "vivid", "soft", "sharp", "abstract", "realistic", "vintage", "modern",
    "elf", "zombie", "hero", "princess", "king", "queen", "3d", "digital",
    "fantasy"};

}  // namespace

ToyJointEmbedder::ToyJointEmbedder(const ToyBackendConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(cfg_.height) * cfg_.width * 3;
    SeededRng master(cfg_.seed);

    SeededRng prng = master.fork(kStreamEmbedProj);
    proj_.resize(cfg_.embed_width, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index r = 0; r < proj_.rows(); ++r)
        for (Eigen::Index c = 0; c < proj_.cols(); ++c) proj_(r, c) = scale * prng.normal();

    const std::uint64_t text_base = master.fork(kStreamText).seed();
    vocab_.assign(std::begin(kVocabulary), std::end(kVocabulary));
    token_vectors_.resize(cfg_.embed_width, static_cast<Eigen::Index>(vocab_.size()));

    // Each token vector is the embedding of a synthetic prototype card: the
    // shared scaffold (mid-gray plus the pose cue) under a token-specific
    // tint, with a few band-limited cosines for texture. Joint training in a
    // real embedder aligns text with image content; here the alignment is by
    // construction, so text directions stay reachable from rendered images.
    const Eigen::ArrayXd xs = axis_centers(cfg_.width);
    const Eigen::ArrayXd ys = axis_centers(cfg_.height);
    PixelPlane gx(cfg_.height, cfg_.width), gy(cfg_.height, cfg_.width);
    for (int i = 0; i < cfg_.height; ++i)
        for (int j = 0; j < cfg_.width; ++j) {
            gx(i, j) = xs[j];
            gy(i, j) = ys[i];
        }
    const double inv2s2 = 1.0 / (2.0 * cfg_.bump_sigma * cfg_.bump_sigma);
    const PixelPlane psi = (-(gx.square() + gy.square()) * inv2s2).exp();

    for (std::size_t t = 0; t < vocab_.size(); ++t) {
        SeededRng wrng(splitmix64(fnv1a64(vocab_[t].data(), vocab_[t].size()) ^ text_base));
        Image card(cfg_.height, cfg_.width, 3);
        for (int c = 0; c < 3; ++c)
            card.plane(c) = 0.5 + 0.15 * wrng.normal() + (0.30 + 0.02 * c) * psi;
        for (int f = 0; f < 3; ++f) {
            const double rx = wrng.uniform(-cfg_.rate_x_max, cfg_.rate_x_max);
            const double omega = wrng.uniform(cfg_.freq_min, cfg_.freq_max);
            const double mag = std::sqrt(omega * omega - rx * rx);
            const double ry = (wrng.uniform() < 0.5) ? -mag : mag;
            const PixelPlane pat = (rx * gx + ry * gy + wrng.uniform(0.0, kTwoPi)).cos();
            for (int c = 0; c < 3; ++c) card.plane(c) += (0.04 * wrng.normal()) * pat;
        }
        card.data = card.data.cwiseMax(0.0).cwiseMin(1.0);
        const Eigen::VectorXd e = proj_ * card.data.matrix();
        token_vectors_.col(static_cast<Eigen::Index>(t)) = e / e.norm();
    }
}

std::vector<std::string> ToyJointEmbedder::tokenize(const std::string& prompt) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : prompt) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

Embedding ToyJointEmbedder::embed_image(const Image& image) const {
    if (image.height != cfg_.height || image.width != cfg_.width || image.channels != 3)
        throw DimensionError("embed_image: image shape mismatch");
    const std::uint64_t key = hash_doubles(image.data.data(),
                                           static_cast<std::size_t>(image.data.size()));
    for (const auto& [k, e] : embed_cache_)
        if (k == key) return e;
    Eigen::VectorXd e = proj_ * image.data.matrix();
    const double n = e.norm();
    if (n < 1e-12) throw ConfigError("embed_image: projection collapsed to zero");
    Embedding out{e / n, true};
    if (embed_cache_.size() >= 16) embed_cache_.erase(embed_cache_.begin());
    embed_cache_.emplace_back(key, out);
    return out;
}

Embedding ToyJointEmbedder::embed_text(const std::string& prompt) const {
    const auto tokens = tokenize(prompt);
    if (tokens.empty()) throw VocabularyError("embed_text: prompt has no tokens");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(cfg_.embed_width);
    for (const auto& tok : tokens) {
        const auto it = std::find(vocab_.begin(), vocab_.end(), tok);
        if (it == vocab_.end())
            throw VocabularyError("embed_text: token '" + tok + "' not in vocabulary");
        acc += token_vectors_.col(it - vocab_.begin());
    }
    acc /= static_cast<double>(tokens.size());
    const double n = acc.norm();
    if (n < 1e-12)
        throw DegenerateDirectionError("embed_text: tokens cancelled to zero");
    return Embedding{acc / n, true};
}

void ToyJointEmbedder::embed_image_backward(const Image& image,
                                            const Eigen::VectorXd& upstream,
                                            Image& grad) const {
    if (upstream.size() != cfg_.embed_width)
        throw DimensionError("embed_image_backward: upstream width mismatch");
    ensure_grad_buffer(grad, image);
    Eigen::VectorXd e = proj_ * image.data.matrix();
    const double n = e.norm();
    if (n < 1e-12) throw ConfigError("embed_image_backward: projection collapsed");
    const Eigen::VectorXd ehat = e / n;
    const Eigen::VectorXd de = (upstream - ehat * ehat.dot(upstream)) / n;
    grad.data += (proj_.transpose() * de).array();
}

std::uint64_t ToyJointEmbedder::param_hash() const {
    std::uint64_t h = hash_doubles(proj_.data(), static_cast<std::size_t>(proj_.size()));
    h = hash_doubles(token_vectors_.data(), static_cast<std::size_t>(token_vectors_.size()), h);
    return h;
}

// ---------------------------------------------------------------------------
// ToyPoseEstimator: separable matched filter against the pose cue
// ---------------------------------------------------------------------------

ToyPoseEstimator::ToyPoseEstimator(const ToyBackendConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    px_x_ = axis_centers(cfg_.width);
    px_y_ = axis_centers(cfg_.height);
}

double ToyPoseEstimator::score(const PixelPlane& centered_luma, double yaw,
                               double pitch) const {
    const double inv2s2 = 1.0 / (2.0 * cfg_.bump_sigma * cfg_.bump_sigma);
    const Eigen::VectorXd col =
        (-(px_y_ + cfg_.pitch_shift * pitch).square() * inv2s2).exp().matrix();
    const Eigen::VectorXd row =
        (-(px_x_ + cfg_.yaw_shift * yaw).square() * inv2s2).exp().matrix();
    // Normalized correlation: the template loses mass when the cue sits
    // near the border, and the raw inner product would drift centerward.
    const double n = static_cast<double>(col.size()) * static_cast<double>(row.size());
    const double mass = col.sum() * row.sum();
    const double energy = col.squaredNorm() * row.squaredNorm();
    const double denom = std::sqrt(std::max(energy - mass * mass / n, 1e-12));
    return col.dot(centered_luma.matrix() * row) / denom;
}

CameraPose ToyPoseEstimator::estimate(const Image& image) const {
    if (image.height != cfg_.height || image.width != cfg_.width || image.channels != 3)
        throw DimensionError("pose estimate: image shape mismatch");
    PixelPlane luma = luminance(image);
    luma -= luma.mean();
    const double luma_norm = std::sqrt(luma.square().sum());
    if (luma_norm < 1e-9)
        throw PoseEstimationError("pose estimate: image carries no pose cue");
    luma /= luma_norm;

    double best_yaw = 0.0, best_pitch = 0.0, best = -1e300;
    for (double yaw = -50.0; yaw <= 50.0 + 1e-9; yaw += 2.5) {
        for (double pitch = -30.0; pitch <= 30.0 + 1e-9; pitch += 2.5) {
            const double s = score(luma, yaw, pitch);
            if (s > best) {
                best = s;
                best_yaw = yaw;
                best_pitch = pitch;
            }
        }
    }
    const double cy = best_yaw, cp = best_pitch;
    for (double yaw = cy - 2.5; yaw <= cy + 2.5 + 1e-9; yaw += 0.25) {
        for (double pitch = cp - 2.5; pitch <= cp + 2.5 + 1e-9; pitch += 0.25) {
            const double s = score(luma, yaw, pitch);
            if (s > best) {
                best = s;
                best_yaw = yaw;
                best_pitch = pitch;
            }
        }
    }

    if (best < cfg_.pose_score_min)
        throw PoseEstimationError("pose estimate: no usable pose cue (peak correlation " +
                                  std::to_string(best) + ")");
    return pose_from_angles(best_yaw, best_pitch, cfg_.camera);
}

// ---------------------------------------------------------------------------
// ToyPerceptualOracle
// ---------------------------------------------------------------------------

ToyPerceptualOracle::ToyPerceptualOracle(const ToyBackendConfig& cfg,
                                         std::shared_ptr<const JointEmbedder> embedder)
    : cfg_(cfg), embedder_(std::move(embedder)) {
    cfg_.validate();
    if (!embedder_) throw ConfigError("ToyPerceptualOracle needs an embedder");
    const Eigen::Index n = static_cast<Eigen::Index>(cfg_.height) * cfg_.width * 3;
    SeededRng irng = SeededRng(cfg_.seed).fork(kStreamIdProj);
    id_proj_.resize(cfg_.id_width, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index r = 0; r < id_proj_.rows(); ++r)
        for (Eigen::Index c = 0; c < id_proj_.cols(); ++c)
            id_proj_(r, c) = scale * irng.normal();
}

double ToyPerceptualOracle::pixel_l2(const Image& a, const Image& b) const {
    require_same_shape(a, b, "pixel_l2");
    return (a.data - b.data).square().mean();
}

double ToyPerceptualOracle::pixel_l2_grad(const Image& a, const Image& b,
                                          Image& grad_a) const {
    require_same_shape(a, b, "pixel_l2");
    ensure_grad_buffer(grad_a, a);
    const double inv_n = 1.0 / static_cast<double>(a.size());
    grad_a.data += 2.0 * inv_n * (a.data - b.data);
    return (a.data - b.data).square().mean();
}

double ToyPerceptualOracle::perceptual(const Image& a, const Image& b) const {
    require_same_shape(a, b, "perceptual");
    const Embedding ea = embedder_->embed_image(a);
    const Embedding eb = embedder_->embed_image(b);
    return 0.25 * (ea.values - eb.values).squaredNorm();
}

double ToyPerceptualOracle::perceptual_grad(const Image& a, const Image& b,
                                            Image& grad_a) const {
    require_same_shape(a, b, "perceptual");
    ensure_grad_buffer(grad_a, a);
    const Embedding ea = embedder_->embed_image(a);
    const Embedding eb = embedder_->embed_image(b);
    const Eigen::VectorXd d = ea.values - eb.values;
    embedder_->embed_image_backward(a, 0.5 * d, grad_a);
    return 0.25 * d.squaredNorm();
}

Eigen::VectorXd ToyPerceptualOracle::id_features(const Image& a) const {
    return id_proj_ * a.data.matrix();
}

double ToyPerceptualOracle::identity(const Image& a, const Image& b) const {
    require_same_shape(a, b, "identity");
    const Eigen::VectorXd qa = id_features(a), qb = id_features(b);
    const double na = qa.norm(), nb = qb.norm();
    if (na < 1e-12 || nb < 1e-12) return (na < 1e-12 && nb < 1e-12) ? 1.0 : 0.0;
    return qa.dot(qb) / (na * nb);
}

double ToyPerceptualOracle::identity_grad(const Image& a, const Image& b,
                                          Image& grad_a) const {
    require_same_shape(a, b, "identity");
    ensure_grad_buffer(grad_a, a);
    const Eigen::VectorXd qa = id_features(a), qb = id_features(b);
    const double na = qa.norm(), nb = qb.norm();
    if (na < 1e-12 || nb < 1e-12) return (na < 1e-12 && nb < 1e-12) ? 1.0 : 0.0;
    const double cosv = qa.dot(qb) / (na * nb);
    const Eigen::VectorXd dq = (qb / nb - cosv * qa / na) / na;
    grad_a.data += (id_proj_.transpose() * dq).array();
    return cosv;
}

PixelPlane ToyPerceptualOracle::depth_map(const Image& a) const {
    return blur3(blur3(luminance(a)));
}

double ToyPerceptualOracle::depth(const Image& a, const Image& b) const {
    require_same_shape(a, b, "depth");
    const PixelPlane da = depth_map(a), db = depth_map(b);
    return (da - db).square().mean();
}

double ToyPerceptualOracle::depth_grad(const Image& a, const Image& b,
                                       Image& grad_a) const {
    require_same_shape(a, b, "depth");
    ensure_grad_buffer(grad_a, a);
    const PixelPlane da = depth_map(a), db = depth_map(b);
    const double inv_n = 1.0 / static_cast<double>(da.size());
    const PixelPlane up = blur3_adjoint(blur3_adjoint(2.0 * inv_n * (da - db)));
    grad_a.plane(0) += kLumaR * up;
    grad_a.plane(1) += kLumaG * up;
    grad_a.plane(2) += kLumaB * up;
    return (da - db).square().mean();
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

Backend make_toy_backend(const ToyBackendConfig& cfg) {
    cfg.validate();
    Backend b;
    auto embedder = std::make_shared<ToyJointEmbedder>(cfg);
    b.g3d = std::make_unique<ToyGenerator3D>(cfg);
    b.g2d = std::make_unique<ToyGenerator2D>(cfg);
    b.embedder = embedder;
    b.pose_estimator = std::make_unique<ToyPoseEstimator>(cfg);
    b.oracle = std::make_unique<ToyPerceptualOracle>(cfg, embedder);
    return b;
}

}  // namespace stylefuse
