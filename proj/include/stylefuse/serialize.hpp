// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stylefuse/camera.hpp"
#include "stylefuse/latent.hpp"

namespace stylefuse {

// Flat binary container ("SFC1"): magic, version, dtype, kind, rank, dims,
// then the payload, everything little-endian. Latents and poses are written
// as 32-bit floats; checkpoints use the 64-bit variant of the same format.
//
//   offset  size  field
//   0       4     magic "SFC1"
//   4       4     version (u32, currently 1)
//   8       4     dtype   (u32: 0 = f32, 1 = f64)
//   12      4     kind    (u32: 0 = generic, 1 = latent, 2 = pose)
//   16      4     rank    (u32)
//   20      4*r   dims    (u32 each)
//   ...           payload (dtype, row-major)

enum class ContainerDtype : std::uint32_t { f32 = 0, f64 = 1 };
enum class ContainerKind : std::uint32_t { generic = 0, latent = 1, pose = 2 };

void save_latent(const std::filesystem::path& path, const LatentCode& code);
LatentCode load_latent(const std::filesystem::path& path);

void save_pose(const std::filesystem::path& path, const CameraPose& pose);
CameraPose load_pose(const std::filesystem::path& path);

/// Generic rank-1/2 array in the same container, used by checkpoints (f64).
void save_array(const std::filesystem::path& path,
                const Eigen::VectorXd& values, ContainerDtype dtype);
Eigen::VectorXd load_array(const std::filesystem::path& path);

// Multi-tensor archive ("SFA1"): named f64 vectors in one file, used for
// checkpointed parameter and optimizer state.
struct TensorArchive {
    std::map<std::string, Eigen::VectorXd> entries;

    void save(const std::filesystem::path& path) const;
    static TensorArchive load(const std::filesystem::path& path);
};

// Human-readable structured-text (JSON) debug forms.
std::string latent_to_text(const LatentCode& code);
std::string pose_to_text(const CameraPose& pose);

}  // namespace stylefuse
