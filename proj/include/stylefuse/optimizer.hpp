// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 stylefuse authors

#pragma once

#include <map>
#include <string>

#include <Eigen/Core>

#include "stylefuse/core.hpp"
#include "stylefuse/serialize.hpp"

namespace stylefuse {

struct AdamConfig {
    double lr = 2e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adaptive-moment optimizer with one moment slot per named parameter block.
/// Blocks step independently; a per-block learning-rate scale lets callers
/// damp sensitive blocks (the pose block during inversion).
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    void set_lr_scale(const std::string& block, double scale) { lr_scale_[block] = scale; }
    double lr_scale(const std::string& block) const {
        const auto it = lr_scale_.find(block);
        return it == lr_scale_.end() ? 1.0 : it->second;
    }

    void step(const std::string& block, Eigen::Ref<Eigen::VectorXd> params,
              const Eigen::VectorXd& grad);

    long step_count(const std::string& block) const {
        const auto it = slots_.find(block);
        return it == slots_.end() ? 0 : it->second.t;
    }

    /// Serializes moment state under `prefix/<block>/{m,v,t}`.
    void save(TensorArchive& archive, const std::string& prefix) const;
    void load(const TensorArchive& archive, const std::string& prefix);

private:
    struct Slot {
        Eigen::VectorXd m, v;
        long t = 0;
    };

    AdamConfig cfg_;
    std::map<std::string, Slot> slots_;
    std::map<std::string, double> lr_scale_;
};

}  // namespace stylefuse
