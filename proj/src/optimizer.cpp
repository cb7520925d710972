// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 stylefuse authors

#include "stylefuse/optimizer.hpp"

#include <cmath>

namespace stylefuse {

void AdamOptimizer::step(const std::string& block, Eigen::Ref<Eigen::VectorXd> params,
                         const Eigen::VectorXd& grad) {
    if (params.size() != grad.size())
        throw DimensionError("AdamOptimizer::step: parameter/gradient size mismatch");
    if (!grad.allFinite())
        throw DivergenceError("AdamOptimizer::step: non-finite gradient for block '" +
                                  block + "'",
                              step_count(block));

    Slot& s = slots_[block];
    if (s.m.size() != params.size()) {
        s.m = Eigen::VectorXd::Zero(params.size());
        s.v = Eigen::VectorXd::Zero(params.size());
        s.t = 0;
    }
    s.t += 1;
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * grad;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    const double rate = cfg_.lr * lr_scale(block);
    params.array() -=
        rate * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps);
}

void AdamOptimizer::save(TensorArchive& archive, const std::string& prefix) const {
    for (const auto& [name, slot] : slots_) {
        archive.entries[prefix + "/" + name + "/m"] = slot.m;
        archive.entries[prefix + "/" + name + "/v"] = slot.v;
        Eigen::VectorXd t(1);
        t[0] = static_cast<double>(slot.t);
        archive.entries[prefix + "/" + name + "/t"] = t;
    }
}

void AdamOptimizer::load(const TensorArchive& archive, const std::string& prefix) {
    slots_.clear();
    const std::string lead = prefix + "/";
    for (const auto& [key, value] : archive.entries) {
        if (key.rfind(lead, 0) != 0) continue;
        const std::string rest = key.substr(lead.size());
        const auto slash = rest.rfind('/');
        if (slash == std::string::npos) continue;
        const std::string block = rest.substr(0, slash);
        const std::string field = rest.substr(slash + 1);
        Slot& s = slots_[block];
        if (field == "m") {
            s.m = value;
        } else if (field == "v") {
            s.v = value;
        } else if (field == "t") {
            if (value.size() != 1)
                throw CheckpointError("AdamOptimizer::load: malformed step counter");
            s.t = static_cast<long>(value[0]);
        }
    }
    for (const auto& [name, slot] : slots_) {
        if (slot.m.size() != slot.v.size())
            throw CheckpointError("AdamOptimizer::load: inconsistent slot '" + name + "'");
    }
}

}  // namespace stylefuse
