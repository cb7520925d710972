// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "stylefuse/core.hpp"

namespace stylefuse {

/// Rendered image with values in [0,1], stored channel-planar:
/// data[c*H*W + i*W + j]. Gradient buffers reuse the same type without
/// the range restriction.
template <typename Scalar>
struct ImageT {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using Plane =
        Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    int height = 0;
    int width = 0;
    int channels = 0;
    Array data;

    ImageT() = default;
    ImageT(int h, int w, int c = 3)
        : height(h), width(w), channels(c),
          data(Array::Zero(static_cast<Eigen::Index>(h) * w * c)) {}

    Eigen::Index size() const { return data.size(); }

    Scalar& operator()(int i, int j, int c) {
        return data[static_cast<Eigen::Index>(c) * height * width +
                    static_cast<Eigen::Index>(i) * width + j];
    }
    Scalar operator()(int i, int j, int c) const {
        return data[static_cast<Eigen::Index>(c) * height * width +
                    static_cast<Eigen::Index>(i) * width + j];
    }

    Eigen::Map<Plane> plane(int c) {
        return Eigen::Map<Plane>(data.data() +
                                     static_cast<Eigen::Index>(c) * height * width,
                                 height, width);
    }
    Eigen::Map<const Plane> plane(int c) const {
        return Eigen::Map<const Plane>(
            data.data() + static_cast<Eigen::Index>(c) * height * width, height,
            width);
    }

    bool same_shape(const ImageT& other) const {
        return height == other.height && width == other.width &&
               channels == other.channels;
    }
};

using Image = ImageT<double>;

template <typename Scalar>
void require_same_shape(const ImageT<Scalar>& a, const ImageT<Scalar>& b,
                        const char* who) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(who) + ": image shapes differ");
}

template <typename Scalar>
Scalar mean_abs_diff(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
    require_same_shape(a, b, "mean_abs_diff");
    return (a.data - b.data).abs().mean();
}

/// Rec.601 luminance plane.
template <typename Scalar>
typename ImageT<Scalar>::Plane luminance(const ImageT<Scalar>& img) {
    typename ImageT<Scalar>::Plane out =
        Scalar(0.299) * img.plane(0) + Scalar(0.587) * img.plane(1) +
        Scalar(0.114) * img.plane(2);
    return out;
}

}  // namespace stylefuse
