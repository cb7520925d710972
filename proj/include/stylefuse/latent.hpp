// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "stylefuse/core.hpp"

namespace stylefuse {

/// Layered style latent: one 512-wide row per mapping layer.
/// The 2D generator uses 18 layers, the 3D generator 14.
template <typename Scalar>
struct LatentCodeT {
    using Matrix =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Matrix values;  // layers x width

    LatentCodeT() = default;
    LatentCodeT(Eigen::Index layers, Eigen::Index width)
        : values(Matrix::Zero(layers, width)) {}
    explicit LatentCodeT(Matrix m) : values(std::move(m)) {}

    Eigen::Index layers() const { return values.rows(); }
    Eigen::Index width() const { return values.cols(); }

    static LatentCodeT constant(Eigen::Index layers, Eigen::Index width, Scalar v) {
        return LatentCodeT(Matrix::Constant(layers, width, v));
    }

    void validate() const {
        if (layers() < 1 || width() < 1)
            throw DimensionError("LatentCode: layers and width must be >= 1");
        if (!values.allFinite())
            throw RangeError("LatentCode: non-finite values");
    }

    bool same_shape(const LatentCodeT& other) const {
        return layers() == other.layers() && width() == other.width();
    }
};

using LatentCode = LatentCodeT<double>;

/// 1-based inclusive range of mapping layers, matching the usual
/// "perturb layers 13-18" phrasing.
struct LayerRange {
    int lo = 1;
    int hi = 1;

    void validate_for(Eigen::Index layers) const {
        if (lo < 1 || lo > hi || hi > layers)
            throw RangeError("LayerRange [" + std::to_string(lo) + "," +
                             std::to_string(hi) + "] invalid for " +
                             std::to_string(layers) + " layers");
    }

    bool contains(int layer_1based) const {
        return layer_1based >= lo && layer_1based <= hi;
    }
};

/// Layer-masked affine interpolation:
/// rows inside `range` become weight*base + (1-weight)*injected,
/// rows outside are copied from `base` bit-exactly.
template <typename Scalar>
LatentCodeT<Scalar> mix_latent(const LatentCodeT<Scalar>& base,
                               const LatentCodeT<Scalar>& injected,
                               Scalar weight, const LayerRange& range) {
    if (!base.same_shape(injected))
        throw DimensionError("mix_latent: base and injected shapes differ");
    if (!(weight >= Scalar(0) && weight <= Scalar(1)))
        throw RangeError("mix_latent: weight must lie in [0,1]");
    range.validate_for(base.layers());

    LatentCodeT<Scalar> out = base;
    const Scalar one_minus = Scalar(1) - weight;
    for (Eigen::Index l = range.lo - 1; l < range.hi; ++l)
        for (Eigen::Index k = 0; k < base.width(); ++k)
            out.values(l, k) =
                weight * base.values(l, k) + one_minus * injected.values(l, k);
    return out;
}

}  // namespace stylefuse
