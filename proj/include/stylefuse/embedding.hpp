// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <span>

#include "stylefuse/core.hpp"

namespace stylefuse {

inline constexpr double kDirectionNormFloor = 1e-8;

/// Joint image-text embedding vector (width 512 by default).
/// Encoder outputs are unit-normalized; direction differences are not.
template <typename Scalar>
struct EmbeddingT {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Vector values;
    bool normalized = false;

    EmbeddingT() = default;
    explicit EmbeddingT(Vector v, bool is_normalized = false)
        : values(std::move(v)), normalized(is_normalized) {}

    Eigen::Index width() const { return values.size(); }
    Scalar norm() const { return values.norm(); }

    static EmbeddingT normalized_from(Vector v) {
        const Scalar n = v.norm();
        if (n < Scalar(kDirectionNormFloor))
            throw DegenerateDirectionError("cannot normalize a near-zero embedding");
        return EmbeddingT(v / n, true);
    }
};

using Embedding = EmbeddingT<double>;

/// Embedding-space direction to_emb - from_emb, e.g. E(target) - E(source).
/// Inputs must be normalized encoder outputs; the result is marked
/// unnormalized.
template <typename Scalar>
EmbeddingT<Scalar> direction(const EmbeddingT<Scalar>& from_emb,
                             const EmbeddingT<Scalar>& to_emb) {
    if (from_emb.width() != to_emb.width())
        throw DimensionError("direction: embedding widths differ");
    if (!from_emb.normalized || !to_emb.normalized)
        throw ConfigError("direction: both embeddings must be normalized");
    return EmbeddingT<Scalar>(to_emb.values - from_emb.values, false);
}

/// Direction alignment loss 1 - cos(d1, d2), range [0,2].
/// Optionally writes the gradient with respect to d1.
/// Either direction with norm below kDirectionNormFloor raises
/// DegenerateDirectionError; callers skip that branch for the step.
template <typename Scalar>
Scalar cosine_direction_loss(const EmbeddingT<Scalar>& d1,
                             const EmbeddingT<Scalar>& d2,
                             EmbeddingT<Scalar>* grad_d1 = nullptr) {
    if (d1.width() != d2.width())
        throw DimensionError("cosine_direction_loss: widths differ");
    const Scalar n1 = d1.values.norm();
    const Scalar n2 = d2.values.norm();
    if (n1 < Scalar(kDirectionNormFloor) || n2 < Scalar(kDirectionNormFloor))
        throw DegenerateDirectionError("cosine_direction_loss: zero direction");

    const auto u1 = d1.values / n1;
    const auto u2 = d2.values / n2;
    const Scalar c = u1.dot(u2);
    if (grad_d1) {
        // d/d d1 [1 - cos] = -(u2 - c*u1) / |d1|
        grad_d1->values = -(u2 - c * u1) / n1;
        grad_d1->normalized = false;
    }
    return Scalar(1) - c;
}

/// Mean L2 distance between per-view unit embeddings; the scalar reduction
/// of the stylization degree. Range [0,2].
template <typename Scalar>
Scalar stylization_distance(std::span<const EmbeddingT<Scalar>> style_embs,
                            std::span<const EmbeddingT<Scalar>> source_embs) {
    if (style_embs.empty())
        throw ConfigError("stylization_distance: empty embedding list");
    if (style_embs.size() != source_embs.size())
        throw DimensionError("stylization_distance: list lengths differ");
    Scalar acc = 0;
    for (std::size_t i = 0; i < style_embs.size(); ++i) {
        if (style_embs[i].width() != source_embs[i].width())
            throw DimensionError("stylization_distance: widths differ");
        acc += (style_embs[i].values - source_embs[i].values).norm();
    }
    return acc / static_cast<Scalar>(style_embs.size());
}

/// Alternative reduction 1 - cos per view (config-switchable ablation).
template <typename Scalar>
Scalar stylization_distance_cos(std::span<const EmbeddingT<Scalar>> style_embs,
                                std::span<const EmbeddingT<Scalar>> source_embs) {
    if (style_embs.empty())
        throw ConfigError("stylization_distance: empty embedding list");
    if (style_embs.size() != source_embs.size())
        throw DimensionError("stylization_distance: list lengths differ");
    Scalar acc = 0;
    for (std::size_t i = 0; i < style_embs.size(); ++i)
        acc += Scalar(1) - style_embs[i].values.dot(source_embs[i].values);
    return acc / static_cast<Scalar>(style_embs.size());
}

}  // namespace stylefuse
