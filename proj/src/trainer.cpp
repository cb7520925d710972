// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include "stylefuse/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>

#include <json.hpp>

#include "stylefuse/serialize.hpp"

namespace stylefuse {
namespace {

using nlohmann::json;

constexpr std::uint64_t kStreamApt = 11;
constexpr std::uint64_t kStreamIte = 12;

json fusion_to_json(const FusionState& s) {
    return json{{"epoch", s.epoch},         {"distance", s.distance},
                {"draw", s.draw},           {"gamma", s.gamma},
                {"loss_image", s.loss_image}, {"loss_text", s.loss_text},
                {"loss_total", s.loss_total}, {"skipped", s.skipped}};
}

FusionState fusion_from_json(const json& j) {
    FusionState s;
    s.epoch = j.at("epoch").get<long>();
    s.distance = j.at("distance").get<double>();
    s.draw = j.at("draw").get<int>();
    s.gamma = j.at("gamma").get<int>();
    s.loss_image = j.at("loss_image").get<double>();
    s.loss_text = j.at("loss_text").get<double>();
    s.loss_total = j.at("loss_total").get<double>();
    s.skipped = j.at("skipped").get<bool>();
    return s;
}

void append_line(const std::filesystem::path& file, const std::string& line) {
    std::ofstream os(file, std::ios::app);
    if (!os) throw CheckpointError("cannot open log file " + file.string());
    os << line << '\n';
}

std::string epoch_dir_name(long epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%06ld", epoch);
    return buf;
}

double pixel_mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "pixel_mse");
    return (a.data - b.data).square().mean();
}

json adam_to_json(const AdamConfig& c) {
    return json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

AdamConfig adam_from_json(const json& j) {
    AdamConfig c;
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    return c;
}

void require_backend(const Backend& backend) {
    if (!backend.g3d || !backend.embedder || !backend.oracle)
        throw ConfigError("trainer: backend is missing g3d, embedder, or oracle");
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("trainer: epochs must be >= 1");
    if (lr <= 0.0) throw ConfigError("trainer: step size must be positive");
    if (batch < 1) throw ConfigError("trainer: batch must be >= 1");
    if (apt_per_cycle < 1 || ite_per_cycle < 1)
        throw ConfigError("trainer: cadence counts must be >= 1");
    if (trainable.empty())
        throw ConfigError("trainer: no trainable submodules selected");
    if (checkpoint_every < 0)
        throw ConfigError("trainer: checkpoint_every must be >= 0");
    inversion.validate();
    effective_stylize().validate();
    fusion.validate();
}

StylizeConfig TrainConfig::effective_stylize() const {
    StylizeConfig out = stylize;
    out.batch = batch;
    out.trainable = trainable;
    return out;
}

RunState init_run_state(const TrainConfig& cfg, const Generator3D& g3d_o) {
    cfg.validate();
    RunState state;
    state.g_s = g3d_o.clone();
    state.g_t = g3d_o.clone();
    state.opt_s = AdamOptimizer(AdamConfig{.lr = cfg.lr});
    state.opt_t = AdamOptimizer(AdamConfig{.lr = cfg.lr});
    const SeededRng master(cfg.seed);
    state.rng_apt = master.fork(kStreamApt);
    state.rng_ite = master.fork(kStreamIte);
    return state;
}

void train_epochs(const ImageBatch& style, const LatentCode& w3d,
                  const CameraPose& pose, const TrainConfig& cfg,
                  const Backend& backend, RunState& state, int epochs,
                  const TrainStepFn& on_step, const StageFn& on_stage) {
    cfg.validate();
    require_backend(backend);
    if (!state.g_s || !state.g_t)
        throw ConfigError("train_epochs: run state has no generators");
    if (style.empty()) throw DimensionError("train_epochs: empty style batch");

    const StylizeConfig scfg = cfg.effective_stylize();
    const TextDirection td = text_direction(*backend.embedder, cfg.fusion);
    const bool log = !cfg.run_dir.empty();

    ParamView ite_view = select_submodule_params(*state.g_t, cfg.trainable);
    std::vector<int> ite_sizes;
    for (const auto* blk : ite_view.blocks)
        ite_sizes.push_back(static_cast<int>(blk->size()));

    for (int e = 0; e < epochs; ++e) {
        const long epoch_now = state.epoch + 1;

        double apt_sum = 0.0;
        for (int a = 0; a < cfg.apt_per_cycle; ++a) {
            std::vector<PairedSample> samples;
            samples.reserve(static_cast<std::size_t>(scfg.batch));
            for (int b = 0; b < scfg.batch; ++b)
                samples.push_back(make_paired_sample(w3d, pose, state.rng_apt,
                                                     scfg, *state.g_s));
            double loss = 0.0;
            try {
                loss = apt_step(style, std::span<const PairedSample>(samples),
                                *state.g_s, *backend.oracle, state.opt_s, scfg);
            } catch (const DivergenceError& e_inner) {
                throw DivergenceError("APT stage diverged at epoch " +
                                          std::to_string(epoch_now) + ": " +
                                          e_inner.what(),
                                      epoch_now);
            }
            apt_sum += loss;
            state.apt_losses.push_back(loss);
            if (log)
                append_line(cfg.run_dir / "apt_loss.jsonl",
                            json{{"epoch", epoch_now}, {"step", a}, {"loss", loss}}
                                .dump());
        }
        if (on_stage) on_stage("apt", state);

        FusionState last_ite;
        for (int i = 0; i < cfg.ite_per_cycle; ++i) {
            const ViewSet views =
                build_views(w3d, state.rng_ite, cfg.fusion, *state.g_s,
                            *state.g_t, *backend.g3d);
            const double dist =
                measure_distance(views, *backend.embedder, cfg.fusion);
            const GammaDraw gd = select_gamma(dist, state.rng_ite, cfg.fusion);

            std::vector<Image> train_grads;
            FusionState ite = ite_loss(views, td, gd.gamma, *backend.embedder,
                                       &train_grads);
            ite.epoch = epoch_now;
            ite.distance = dist;
            ite.draw = gd.draw;
            if (!std::isfinite(ite.loss_total))
                throw DivergenceError("ITE stage diverged at epoch " +
                                          std::to_string(epoch_now),
                                      epoch_now);

            if (!ite.skipped) {
                GeneratorGrads grads;
                grads.reset(state.g_t->latent_layers(), state.g_t->latent_width(),
                            ite_view.names, ite_sizes);
                for (std::size_t m = 0; m < train_grads.size(); ++m)
                    state.g_t->render_backward(w3d, views.poses[m],
                                               train_grads[m], grads,
                                               ite_view.names);
                for (std::size_t k = 0; k < ite_view.names.size(); ++k)
                    state.opt_t.step("ite/" + ite_view.names[k],
                                     *ite_view.blocks[k],
                                     grads.d_params[ite_view.names[k]]);
            }
            state.history.push_back(ite);
            last_ite = ite;
            if (log)
                append_line(cfg.run_dir / "fusion.jsonl", fusion_state_json(ite));
        }
        if (on_stage) on_stage("ite", state);

        state.epoch = epoch_now;
        if (log && cfg.checkpoint_every > 0 &&
            epoch_now % cfg.checkpoint_every == 0)
            save_checkpoint(state, cfg.run_dir / "checkpoints" /
                                       epoch_dir_name(epoch_now));
        if (on_step)
            on_step(TrainStep{epoch_now,
                              apt_sum / static_cast<double>(cfg.apt_per_cycle),
                              last_ite});
    }
}

void resume_train(const ImageBatch& style, const LatentCode& w3d,
                  const CameraPose& pose, const TrainConfig& cfg,
                  const Backend& backend, RunState& state,
                  const TrainStepFn& on_step) {
    cfg.validate();
    const int remaining =
        static_cast<int>(std::max<long>(0, cfg.epochs - state.epoch));
    train_epochs(style, w3d, pose, cfg, backend, state, remaining, on_step);
    if (!cfg.run_dir.empty()) {
        save_checkpoint(state, cfg.run_dir / "checkpoints" / "final");
        std::filesystem::create_directories(cfg.run_dir / "final");
        save_latent(cfg.run_dir / "final" / "latent.sfc", w3d);
        save_pose(cfg.run_dir / "final" / "pose.sfc", pose);
    }
}

RunState alternate_train(const ImageBatch& style, const LatentCode& w3d,
                         const CameraPose& pose, const TrainConfig& cfg,
                         const Backend& backend, const TrainStepFn& on_step) {
    require_backend(backend);
    RunState state = init_run_state(cfg, *backend.g3d);
    resume_train(style, w3d, pose, cfg, backend, state, on_step);
    return state;
}

void save_checkpoint(const RunState& state, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!state.g_s || !state.g_t)
        throw ConfigError("save_checkpoint: run state has no generators");

    const fs::path tmp = dir.string() + ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    TensorArchive archive;
    const auto dump_params = [&](const Generator3D& g, const std::string& prefix) {
        for (const auto& name : g.module_names())
            archive.entries[prefix + "/" + name] = g.module_params(name);
    };
    dump_params(*state.g_s, "g_s");
    dump_params(*state.g_t, "g_t");
    state.opt_s.save(archive, "opt_s");
    state.opt_t.save(archive, "opt_t");
    archive.save(tmp / "state.sfa");

    json meta;
    meta["format_version"] = kCheckpointFormatVersion;
    meta["epoch"] = state.epoch;
    meta["adam_s"] = adam_to_json(state.opt_s.config());
    meta["adam_t"] = adam_to_json(state.opt_t.config());
    meta["rng_apt"] = state.rng_apt.save_state();
    meta["rng_ite"] = state.rng_ite.save_state();
    meta["apt_losses"] = state.apt_losses;
    json history = json::array();
    for (const auto& s : state.history) history.push_back(fusion_to_json(s));
    meta["history"] = history;
    {
        std::ofstream os(tmp / "meta.json");
        if (!os) throw CheckpointError("cannot write " + (tmp / "meta.json").string());
        os << meta.dump(2) << '\n';
    }

    fs::remove_all(dir);
    if (!dir.parent_path().empty()) fs::create_directories(dir.parent_path());
    fs::rename(tmp, dir);
}

RunState load_checkpoint(const std::filesystem::path& dir,
                         const Generator3D& prototype) {
    std::ifstream is(dir / "meta.json");
    if (!is)
        throw CheckpointError("checkpoint: missing meta.json in " + dir.string());
    json meta;
    try {
        is >> meta;
    } catch (const json::exception&) {
        throw CheckpointError("checkpoint: malformed meta.json in " + dir.string());
    }

    RunState state;
    try {
        const int version = meta.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion)
            throw CheckpointError("checkpoint: format version " +
                                  std::to_string(version) + " is not supported");

        if (!std::filesystem::exists(dir / "state.sfa"))
            throw CheckpointError("checkpoint: " + dir.string() +
                                  " has no state.sfa");
        const TensorArchive archive = TensorArchive::load(dir / "state.sfa");
        const auto restore = [&](Generator3D& g, const std::string& prefix) {
            for (const auto& name : g.module_names()) {
                const auto it = archive.entries.find(prefix + "/" + name);
                if (it == archive.entries.end())
                    throw CheckpointError("checkpoint: missing block " + prefix +
                                          "/" + name);
                Eigen::VectorXd& params = g.module_params_mut(name);
                if (it->second.size() != params.size())
                    throw CheckpointError("checkpoint: block " + prefix + "/" +
                                          name + " has the wrong size");
                params = it->second;
            }
        };
        state.g_s = prototype.clone();
        state.g_t = prototype.clone();
        restore(*state.g_s, "g_s");
        restore(*state.g_t, "g_t");

        state.opt_s = AdamOptimizer(adam_from_json(meta.at("adam_s")));
        state.opt_t = AdamOptimizer(adam_from_json(meta.at("adam_t")));
        state.opt_s.load(archive, "opt_s");
        state.opt_t.load(archive, "opt_t");

        state.rng_apt.load_state(meta.at("rng_apt").get<std::string>());
        state.rng_ite.load_state(meta.at("rng_ite").get<std::string>());
        state.epoch = meta.at("epoch").get<long>();
        state.apt_losses = meta.at("apt_losses").get<std::vector<double>>();
        for (const auto& j : meta.at("history"))
            state.history.push_back(fusion_from_json(j));
    } catch (const json::exception&) {
        throw CheckpointError("checkpoint: meta.json in " + dir.string() +
                              " is missing required fields");
    }
    return state;
}

std::string fusion_state_json(const FusionState& state) {
    return fusion_to_json(state).dump();
}

FusionState fusion_state_parse(const std::string& line) {
    try {
        return fusion_from_json(json::parse(line));
    } catch (const json::exception&) {
        throw CheckpointError("fusion log: malformed record: " + line);
    }
}

PtiResult pti_invert_edit(const ImageBatch& target, const PtiConfig& cfg,
                          const Backend& backend) {
    cfg.validate();
    require_backend(backend);
    if (!backend.g2d || !backend.pose_estimator)
        throw ConfigError("pti_invert_edit: backend is missing g2d or estimator");
    if (target.empty())
        throw DimensionError("pti_invert_edit: empty target batch");

    const SeededRng master(cfg.seed);
    SeededRng rng_pose = master.fork(1);
    SeededRng rng_inv = master.fork(2);
    SeededRng rng_tune = master.fork(3);

    const LatentCode w2d = backend.g2d->encode(target.front());
    const CameraPose init =
        init_pose_from_photo(target, w2d, rng_pose, cfg.inversion,
                             *backend.g2d, *backend.pose_estimator);
    const InversionResult inv = invert_artistic(
        target, init, cfg.inversion, *backend.g3d, *backend.oracle, rng_inv);

    PtiResult out;
    out.w3d = inv.w3d;
    out.pose = inv.pose;
    out.generator = backend.g3d->clone();
    out.stage1_mse =
        pixel_mse(out.generator->render(out.w3d, out.pose), target.front());

    AdamOptimizer opt(AdamConfig{.lr = cfg.lr});
    for (int s = 0; s < cfg.tune_steps; ++s) {
        const PairedSample sample = make_paired_sample(
            out.w3d, out.pose, rng_tune, cfg.stylize, *out.generator);
        double pre = 0.0;
        for (std::size_t i = 0; i < sample.images.size(); ++i) {
            const Image& ref = target[i % target.size()];
            pre += cfg.stylize.use_pixel_loss
                       ? backend.oracle->pixel_l2(sample.images[i], ref)
                       : backend.oracle->perceptual(sample.images[i], ref);
        }
        if (pre / static_cast<double>(sample.images.size()) < cfg.tune_tol)
            break;
        apt_step(target, sample, *out.generator, *backend.oracle, opt,
                 cfg.stylize);
    }
    out.stage2_mse =
        pixel_mse(out.generator->render(out.w3d, out.pose), target.front());
    return out;
}

}  // namespace stylefuse
