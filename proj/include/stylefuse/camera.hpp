// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <utility>
#include <vector>

#include "stylefuse/core.hpp"

namespace stylefuse {

inline constexpr double kDegToRad = 0.017453292519943295;

/// Fixed camera conventions shared by pose constructors, the toy backend,
/// and checkpoint adapters. Roll is always zero; only yaw and pitch vary.
struct CameraConventions {
    double radius = 2.7;      // orbit distance from the head center
    double focal = 4.2647;    // normalized focal length
    double principal = 0.5;   // normalized principal point
};

/// 25-component camera description: a row-major 4x4 camera-to-world
/// extrinsic followed by a row-major 3x3 intrinsic.
///
/// The rotation is R = Ry(yaw) * Rx(pitch) and the camera sits at
/// R * (0, 0, radius), so yaw/pitch are recoverable from the matrix.
struct CameraPose {
    static constexpr int kComponents = 25;

    Eigen::Matrix4d extrinsic = Eigen::Matrix4d::Identity();
    Eigen::Matrix3d intrinsic = Eigen::Matrix3d::Identity();

    double yaw_deg() const {
        return std::atan2(-extrinsic(2, 0), extrinsic(0, 0)) / kDegToRad;
    }
    double pitch_deg() const {
        return std::atan2(-extrinsic(1, 2), extrinsic(1, 1)) / kDegToRad;
    }
    double radius() const { return extrinsic.block<3, 1>(0, 3).norm(); }

    /// Row-major extrinsic then row-major intrinsic, 25 values total.
    Eigen::Matrix<double, kComponents, 1> flatten() const {
        Eigen::Matrix<double, kComponents, 1> out;
        int idx = 0;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) out(idx++) = extrinsic(r, c);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out(idx++) = intrinsic(r, c);
        return out;
    }

    static CameraPose from_flat(const Eigen::Matrix<double, kComponents, 1>& v) {
        CameraPose p;
        int idx = 0;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) p.extrinsic(r, c) = v(idx++);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) p.intrinsic(r, c) = v(idx++);
        return p;
    }

    /// Orthonormality defect of the rotation block, ||R^T R - I||_inf.
    double rotation_defect() const {
        const Eigen::Matrix3d r = extrinsic.block<3, 3>(0, 0);
        return (r.transpose() * r - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    }

    void validate() const {
        if (rotation_defect() > 1e-5)
            throw RangeError("CameraPose: rotation block not orthonormal");
        if (std::abs(intrinsic(2, 2) - 1.0) > 1e-12)
            throw RangeError("CameraPose: intrinsic(2,2) must be 1");
    }
};

/// Orbit pose at the given yaw/pitch (degrees), roll fixed at zero.
inline CameraPose pose_from_angles(double yaw_deg, double pitch_deg,
                                   const CameraConventions& conv = {}) {
    const double y = yaw_deg * kDegToRad;
    const double p = pitch_deg * kDegToRad;

    Eigen::Matrix3d rot_yaw;
    rot_yaw << std::cos(y), 0.0, std::sin(y),
               0.0, 1.0, 0.0,
               -std::sin(y), 0.0, std::cos(y);
    Eigen::Matrix3d rot_pitch;
    rot_pitch << 1.0, 0.0, 0.0,
                 0.0, std::cos(p), -std::sin(p),
                 0.0, std::sin(p), std::cos(p);

    CameraPose pose;
    const Eigen::Matrix3d r = rot_yaw * rot_pitch;
    pose.extrinsic.block<3, 3>(0, 0) = r;
    pose.extrinsic.block<3, 1>(0, 3) = r * Eigen::Vector3d(0, 0, conv.radius);
    pose.intrinsic << conv.focal, 0.0, conv.principal,
                      0.0, conv.focal, conv.principal,
                      0.0, 0.0, 1.0;
    return pose;
}

/// Frontal camera: yaw 0, pitch 0.
inline CameraPose canonical_pose(const CameraConventions& conv = {}) {
    return pose_from_angles(0.0, 0.0, conv);
}

/// n poses with yaw ~ U(yaw_range) and pitch ~ U(pitch_range).
/// Each pose consumes exactly two uniform draws (yaw first).
inline std::vector<CameraPose> sample_multiview_poses(
    SeededRng& rng, int n, std::pair<double, double> yaw_range_deg,
    std::pair<double, double> pitch_range_deg,
    const CameraConventions& conv = {}) {
    if (n < 1) throw ConfigError("sample_multiview_poses: n must be >= 1");
    if (!(yaw_range_deg.first <= yaw_range_deg.second) ||
        !(pitch_range_deg.first <= pitch_range_deg.second))
        throw ConfigError("sample_multiview_poses: empty angle range");

    std::vector<CameraPose> poses;
    poses.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double yaw = rng.uniform(yaw_range_deg.first, yaw_range_deg.second);
        const double pitch =
            rng.uniform(pitch_range_deg.first, pitch_range_deg.second);
        poses.push_back(pose_from_angles(yaw, pitch, conv));
    }
    return poses;
}

}  // namespace stylefuse
