// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "stylefuse/backend.hpp"
#include "stylefuse/fusion.hpp"
#include "stylefuse/inversion.hpp"
#include "stylefuse/optimizer.hpp"
#include "stylefuse/stylizer.hpp"

namespace stylefuse {

inline constexpr int kCheckpointFormatVersion = 1;

/// Run-directory layout written by alternate_train (all under cfg.run_dir):
///   apt_loss.jsonl             one record per APT step
///   fusion.jsonl               one FusionState record per ITE step
///   checkpoints/epoch_NNNNNN/  periodic checkpoints (cfg.checkpoint_every)
///   checkpoints/final/         state at the last completed epoch
///   final/latent.sfc           the pivot latent the run trained around
///   final/pose.sfc             its camera pose
/// A resumed run appends to the log files; consumers that care about exact
/// cardinality should dedupe by epoch, keeping the last record.
struct TrainConfig {
    int epochs = 400;
    double lr = 2e-3;
    int batch = 2;
    // Alternation cadence: APT steps, then ITE steps, per cycle.
    int apt_per_cycle = 1;
    int ite_per_cycle = 1;
    std::set<std::string> trainable{"synthesis", "superresolution", "decoder"};
    std::uint64_t seed = 1;
    InversionConfig inversion;
    StylizeConfig stylize;
    FusionConfig fusion;
    // 0 keeps only the final checkpoint.
    int checkpoint_every = 0;
    // Empty runs fully in memory and writes nothing.
    std::filesystem::path run_dir;

    void validate() const;

    /// Stage settings with the trainer-level batch and trainable set applied;
    /// the nested block carries only stage-specific knobs.
    StylizeConfig effective_stylize() const;
};

/// Complete mutable state of one alternating run. Owns both trainable
/// generators; g3d_o stays with the backend and is never copied here.
struct RunState {
    long epoch = 0;
    std::unique_ptr<Generator3D> g_s;
    std::unique_ptr<Generator3D> g_t;
    AdamOptimizer opt_s;
    AdamOptimizer opt_t;
    SeededRng rng_apt{0};
    SeededRng rng_ite{0};
    std::vector<double> apt_losses;
    std::vector<FusionState> history;
};

struct TrainStep {
    long epoch = 0;
    double apt_loss = 0.0;
    FusionState ite;
};
using TrainStepFn = std::function<void(const TrainStep&)>;

/// Diagnostics hook fired inside each cycle, once after the APT stage
/// ("apt") and once after the ITE stage ("ite"), with the state as it
/// stands at that boundary.
using StageFn = std::function<void(const std::string& stage, const RunState&)>;

/// Fresh state at epoch 0: g_s and g_t cloned from g3d_o, empty moments,
/// forked rng streams.
RunState init_run_state(const TrainConfig& cfg, const Generator3D& g3d_o);

/// Advances `epochs` further cycles from wherever `state` stands. Each cycle
/// runs the configured APT steps on g_s, then the ITE steps on g_t, against
/// the frozen g3d_o. `style` is the one-shot exemplar; (w3d, pose) is the
/// inversion pivot. Throws DivergenceError naming the stage and epoch.
void train_epochs(const ImageBatch& style, const LatentCode& w3d,
                  const CameraPose& pose, const TrainConfig& cfg,
                  const Backend& backend, RunState& state, int epochs,
                  const TrainStepFn& on_step = {}, const StageFn& on_stage = {});

/// Continues a loaded or fresh state up to cfg.epochs total cycles, then
/// refreshes the final run-dir artifacts. No-op on the cycle count when
/// state.epoch >= cfg.epochs.
void resume_train(const ImageBatch& style, const LatentCode& w3d,
                  const CameraPose& pose, const TrainConfig& cfg,
                  const Backend& backend, RunState& state,
                  const TrainStepFn& on_step = {});

/// Full run: init_run_state + cfg.epochs cycles + run-dir artifacts.
RunState alternate_train(const ImageBatch& style, const LatentCode& w3d,
                         const CameraPose& pose, const TrainConfig& cfg,
                         const Backend& backend, const TrainStepFn& on_step = {});

/// Writes `dir/state.sfa` + `dir/meta.json` through a temp directory and a
/// final rename, so a partially written checkpoint is never visible under
/// `dir`. An existing checkpoint at `dir` is replaced.
void save_checkpoint(const RunState& state, const std::filesystem::path& dir);

/// Rebuilds a RunState from save_checkpoint output. `prototype` supplies the
/// generator architecture (any generator with matching module shapes, usually
/// g3d_o). Malformed or version-mismatched files raise CheckpointError.
RunState load_checkpoint(const std::filesystem::path& dir,
                         const Generator3D& prototype);

/// One FusionState as a single-line JSON record, and its inverse.
std::string fusion_state_json(const FusionState& state);
FusionState fusion_state_parse(const std::string& line);

struct PtiConfig {
    InversionConfig inversion;
    // Stage 2 tunes at the pivot exactly (mixing weight 1); lowering beta
    // widens the tuned neighborhood.
    StylizeConfig stylize{.beta = 1.0};
    int tune_steps = 100;
    double lr = 2e-3;
    // Tuning stops before the step whose batch loss already sits below this,
    // so an in-domain pivot leaves the generator untouched.
    double tune_tol = 1e-8;
    std::uint64_t seed = 1;

    void validate() const {
        inversion.validate();
        stylize.validate();
        if (tune_steps < 0) throw ConfigError("pti: tune_steps must be >= 0");
        if (lr <= 0.0) throw ConfigError("pti: step size must be positive");
        if (tune_tol < 0.0) throw ConfigError("pti: tune_tol must be >= 0");
    }
};

struct PtiResult {
    std::unique_ptr<Generator3D> generator;
    LatentCode w3d;
    CameraPose pose;
    double stage1_mse = 0.0;
    double stage2_mse = 0.0;
};

/// Two-stage pivot workflow: invert the target with the generator frozen,
/// then fine-tune a clone of g3d_o around the recovered pivot. Zero
/// tune_steps returns the clone untouched. The pose is initialized from the
/// photo-realized target via the backend's estimator; estimator failures
/// propagate.
PtiResult pti_invert_edit(const ImageBatch& target, const PtiConfig& cfg,
                          const Backend& backend);

}  // namespace stylefuse
