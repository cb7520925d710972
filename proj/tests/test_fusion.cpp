// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "stylefuse/fusion.hpp"
#include "stylefuse/toy_backend.hpp"
#include "support.hpp"

using namespace stylefuse;
using testsupport::sample_latent;
using testsupport::shared_backend;

namespace {

FusionConfig default_fusion() {
    FusionConfig cfg;
    cfg.target_text = "a cartoon portrait";
    return cfg;
}

Embedding random_unit(SeededRng& rng, int width) {
    Eigen::VectorXd v(width);
    for (int i = 0; i < width; ++i) v[i] = rng.normal();
    return Embedding::normalized_from(v);
}

/// Clone of g with additive noise on the named module's parameters.
std::unique_ptr<Generator3D> perturbed_clone(const Generator3D& g,
                                             const std::string& module,
                                             double scale, std::uint64_t seed) {
    auto out = g.clone();
    auto view = select_submodule_params(*out, {module});
    SeededRng rng(seed);
    for (auto& block : view.blocks)
        for (Eigen::Index i = 0; i < block->size(); ++i)
            (*block)[i] += scale * rng.normal();
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("fusion");

TEST_CASE("direction and cosine loss primitives match hand math") {
    SeededRng rng(901);
    const Embedding e1 = random_unit(rng, 32);
    const Embedding e2 = random_unit(rng, 32);

    const Embedding d = direction(e1, e2);
    CHECK(d.normalized == false);
    CHECK((d.values - (e2.values - e1.values)).cwiseAbs().maxCoeff() == 0.0);

    Embedding raw;
    raw.values = e1.values;
    raw.normalized = false;
    CHECK_THROWS_AS(direction(raw, e2), ConfigError);

    const Embedding d2 = direction(e2, e1);
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (int i = 0; i < 32; ++i) {
        dot += d.values[i] * d2.values[i];
        n1 += d.values[i] * d.values[i];
        n2 += d2.values[i] * d2.values[i];
    }
    const double want = 1.0 - dot / (std::sqrt(n1) * std::sqrt(n2));
    CHECK(cosine_direction_loss(d, d2) == doctest::Approx(want).epsilon(1e-12));

    Embedding grad;
    cosine_direction_loss(d, d2, &grad);
    const double h = 1e-6;
    Embedding probe = d;
    for (int trial = 0; trial < 10; ++trial) {
        const int idx = rng.uniform_int(0, 31);
        const double x0 = probe.values[idx];
        const double fd = testsupport::central_difference(
            [&](double x) {
                probe.values[idx] = x;
                const double v = cosine_direction_loss(probe, d2);
                probe.values[idx] = x0;
                return v;
            },
            x0, h);
        CHECK(testsupport::rel_error(grad.values[idx], fd, 1e-5) < 1e-4);
    }

    Embedding zero;
    zero.values = Eigen::VectorXd::Zero(32);
    CHECK_THROWS_AS(cosine_direction_loss(zero, d2), DegenerateDirectionError);
    CHECK_THROWS_AS(cosine_direction_loss(d, zero), DegenerateDirectionError);

    for (int trial = 0; trial < 50; ++trial) {
        const Embedding a = direction(random_unit(rng, 16), random_unit(rng, 16));
        const Embedding b = direction(random_unit(rng, 16), random_unit(rng, 16));
        const double loss = cosine_direction_loss(a, b);
        CHECK(loss >= 0.0);
        CHECK(loss <= 2.0);
    }
}

TEST_CASE("stylization distance reductions match their oracles") {
    SeededRng rng(911);
    std::vector<Embedding> style, source;
    for (int i = 0; i < 5; ++i) {
        style.push_back(random_unit(rng, 24));
        source.push_back(random_unit(rng, 24));
    }
    const std::span<const Embedding> a(style), b(source);

    double l2 = 0.0, cosd = 0.0;
    for (int i = 0; i < 5; ++i) {
        double sq = 0.0, dot = 0.0;
        for (int k = 0; k < 24; ++k) {
            const double diff = style[i].values[k] - source[i].values[k];
            sq += diff * diff;
            dot += style[i].values[k] * source[i].values[k];
        }
        l2 += std::sqrt(sq);
        cosd += 1.0 - dot;
    }
    CHECK(stylization_distance(a, b) == doctest::Approx(l2 / 5.0).epsilon(1e-12));
    CHECK(stylization_distance_cos(a, b) ==
          doctest::Approx(cosd / 5.0).epsilon(1e-12));

    CHECK(stylization_distance(a, a) == 0.0);
    CHECK(stylization_distance_cos(a, a) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<Embedding> anti;
    for (const auto& e : style) anti.push_back(Embedding(-e.values, true));
    const std::span<const Embedding> c(anti);
    CHECK(stylization_distance(a, c) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(stylization_distance_cos(a, c) == doctest::Approx(2.0).epsilon(1e-12));

    const std::span<const Embedding> empty;
    CHECK_THROWS_AS(stylization_distance(empty, empty), ConfigError);
    std::vector<Embedding> four(style.begin(), style.begin() + 4);
    CHECK_THROWS_AS(
        stylization_distance(a, std::span<const Embedding>(four)),
        DimensionError);
}

TEST_CASE("text direction caches prompt embeddings and their difference") {
    const auto& b = shared_backend();
    const FusionConfig cfg = default_fusion();

    const TextDirection td = text_direction(*b.embedder, cfg);
    const Embedding target = b.embedder->embed_text(cfg.target_text);
    const Embedding source = b.embedder->embed_text(cfg.source_text);
    CHECK((td.target.values - target.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((td.source.values - source.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((td.delta.values - (target.values - source.values))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(td.delta.norm() > kDirectionNormFloor);

    FusionConfig same = cfg;
    same.target_text = same.source_text;
    CHECK_THROWS_AS(text_direction(*b.embedder, same),
                    DegenerateDirectionError);

    FusionConfig unknown = cfg;
    unknown.target_text = "a qzxvk portrait";
    CHECK_THROWS_AS(text_direction(*b.embedder, unknown), VocabularyError);

    FusionConfig blank = cfg;
    blank.target_text.clear();
    CHECK_THROWS_AS(text_direction(*b.embedder, blank), ConfigError);
}

TEST_CASE("gate truth table and boundaries") {
    const FusionConfig cfg = default_fusion();

    CHECK(gamma_from_draw(0.4, 80, cfg) == 0);
    CHECK(gamma_from_draw(0.7, 80, cfg) == 0);
    CHECK(gamma_from_draw(0.9, 30, cfg) == 0);
    CHECK(gamma_from_draw(0.9, 50, cfg) == 0);
    CHECK(gamma_from_draw(0.9, 51, cfg) == 1);
    CHECK(gamma_from_draw(0.9, 80, cfg) == 1);

    SeededRng r1(77), r2(77);
    const GammaDraw below = select_gamma(0.4, r1, cfg);
    CHECK(below.gamma == 0);
    CHECK(below.draw == -1);
    CHECK(r1.uniform() == r2.uniform());

    const GammaDraw above = select_gamma(1.2, r1, cfg);
    CHECK(above.draw >= 1);
    CHECK(above.draw <= 100);
    CHECK(above.gamma == gamma_from_draw(1.2, above.draw, cfg));

    CHECK_THROWS_AS(select_gamma(-0.1, r1, cfg), RangeError);
    FusionConfig bad = cfg;
    bad.tau = -1.0;
    CHECK_THROWS_AS(select_gamma(0.5, r1, bad), ConfigError);
    bad = cfg;
    bad.xi = 0;
    CHECK_THROWS_AS(select_gamma(0.5, r1, bad), ConfigError);
}

TEST_CASE("gate statistics match the fifty-fifty split") {
    const FusionConfig cfg = default_fusion();
    SeededRng rng(921);
    const int n = 10000;

    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        const GammaDraw gd = select_gamma(0.9, rng, cfg);
        CHECK(gd.draw >= 1);
        CHECK(gd.draw <= 100);
        if (gd.gamma == 0) ++zeros;
    }
    const double frac = static_cast<double>(zeros) / n;
    CHECK(frac >= 0.48);
    CHECK(frac <= 0.52);

    int forced = 0;
    for (int i = 0; i < n; ++i) {
        const GammaDraw gd = select_gamma(0.3, rng, cfg);
        if (gd.gamma == 0 && gd.draw == -1) ++forced;
    }
    CHECK(forced == n);

    FusionConfig always = cfg;
    always.xi = 100;
    for (int i = 0; i < 200; ++i)
        CHECK(select_gamma(0.9, rng, always).gamma == 0);

    FusionConfig nearly_never = cfg;
    nearly_never.xi = 1;
    int ones = 0;
    for (int i = 0; i < n; ++i)
        ones += select_gamma(0.9, rng, nearly_never).gamma;
    const double one_frac = static_cast<double>(ones) / n;
    CHECK(one_frac >= 0.985);
    CHECK(one_frac <= 0.995);
}

TEST_CASE("gate is monotone in the threshold") {
    FusionConfig lo = default_fusion();
    FusionConfig hi = default_fusion();
    int violations = 0;
    for (double d = 0.05; d < 2.0; d += 0.1)
        for (int draw : {1, 37, 50, 51, 99})
            for (double t1 = 0.1; t1 < 1.6; t1 += 0.2)
                for (double t2 = t1; t2 < 1.6; t2 += 0.2) {
                    lo.tau = t1;
                    hi.tau = t2;
                    if (gamma_from_draw(d, draw, hi) > gamma_from_draw(d, draw, lo))
                        ++violations;
                }
    CHECK(violations == 0);
}

TEST_CASE("build_views pairs poses and broadcasts the canonical source") {
    const auto& b = shared_backend();
    SeededRng rng(931);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();

    const auto g_s = perturbed_clone(*b.g3d, "decoder", 0.2, 41);
    const auto g_t = b.g3d->clone();

    SeededRng pose_rng(932);
    const ViewSet views = build_views(w3d, pose_rng, cfg, *g_s, *g_t, *b.g3d);
    REQUIRE(views.poses.size() == 3);
    REQUIRE(views.style.size() == 3);
    REQUIRE(views.train.size() == 3);
    REQUIRE(views.source.size() == 3);

    const Image canonical = b.g3d->render(w3d, canonical_pose(cfg.camera));
    for (int i = 0; i < 3; ++i) {
        CHECK(views.poses[i].yaw_deg() >= cfg.yaw_range.first - 1e-9);
        CHECK(views.poses[i].yaw_deg() <= cfg.yaw_range.second + 1e-9);
        CHECK(views.poses[i].pitch_deg() >= cfg.pitch_range.first - 1e-9);
        CHECK(views.poses[i].pitch_deg() <= cfg.pitch_range.second + 1e-9);

        const Image style_i = g_s->render(w3d, views.poses[i]);
        const Image train_i = g_t->render(w3d, views.poses[i]);
        CHECK((views.style[i].data - style_i.data).cwiseAbs().maxCoeff() == 0.0);
        CHECK((views.train[i].data - train_i.data).cwiseAbs().maxCoeff() == 0.0);
        CHECK((views.source[i].data - canonical.data).cwiseAbs().maxCoeff() ==
              0.0);
    }
}

TEST_CASE("build_views determinism and degenerate pose range") {
    const auto& b = shared_backend();
    SeededRng rng(941);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();
    const auto g_s = perturbed_clone(*b.g3d, "decoder", 0.2, 42);
    const auto g_t = b.g3d->clone();

    SeededRng r1(7), r2(7);
    const ViewSet v1 = build_views(w3d, r1, cfg, *g_s, *g_t, *b.g3d);
    const ViewSet v2 = build_views(w3d, r2, cfg, *g_s, *g_t, *b.g3d);
    for (int i = 0; i < 3; ++i) {
        CHECK(v1.poses[i].yaw_deg() == v2.poses[i].yaw_deg());
        CHECK(v1.poses[i].pitch_deg() == v2.poses[i].pitch_deg());
        CHECK((v1.style[i].data - v2.style[i].data).cwiseAbs().maxCoeff() == 0.0);
        CHECK((v1.train[i].data - v2.train[i].data).cwiseAbs().maxCoeff() == 0.0);
    }

    FusionConfig frontal = cfg;
    frontal.yaw_range = {0.0, 0.0};
    frontal.pitch_range = {0.0, 0.0};
    const ViewSet v3 = build_views(w3d, r1, frontal, *g_s, *g_t, *b.g3d);
    for (int i = 0; i < 3; ++i)
        CHECK((v3.train[i].data - v3.source[i].data).cwiseAbs().maxCoeff() ==
              0.0);
}

TEST_CASE("build_views validates latent shape agreement") {
    const auto& b = shared_backend();
    const Backend small = make_toy_backend(testsupport::small_config());
    SeededRng rng(951);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();
    CHECK_THROWS_AS(
        build_views(w3d, rng, cfg, *small.g3d, *b.g3d, *b.g3d),
        DimensionError);
}

TEST_CASE("measure_distance agrees with the embedding-space oracle") {
    const auto& b = shared_backend();
    SeededRng rng(961);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();
    const auto g_s = perturbed_clone(*b.g3d, "synthesis", 0.3, 43);
    const auto g_t = b.g3d->clone();
    const ViewSet views = build_views(w3d, rng, cfg, *g_s, *g_t, *b.g3d);

    double l2 = 0.0, cosd = 0.0;
    for (int i = 0; i < 3; ++i) {
        const Embedding es = b.embedder->embed_image(views.style[i]);
        const Embedding eo = b.embedder->embed_image(views.source[i]);
        l2 += (es.values - eo.values).norm();
        cosd += 1.0 - es.values.dot(eo.values);
    }
    CHECK(measure_distance(views, *b.embedder, cfg) ==
          doctest::Approx(l2 / 3.0).epsilon(1e-12));
    FusionConfig alt = cfg;
    alt.cos_reduction = true;
    CHECK(measure_distance(views, *b.embedder, alt) ==
          doctest::Approx(cosd / 3.0).epsilon(1e-12));

    ViewSet same = views;
    same.style = same.source;
    CHECK(measure_distance(same, *b.embedder, cfg) == 0.0);

    ViewSet broken = views;
    broken.source.pop_back();
    CHECK_THROWS_AS(measure_distance(broken, *b.embedder, cfg), DimensionError);
}

TEST_CASE("freshly cloned generators start below the gate threshold") {
    const auto& b = shared_backend();
    const FusionConfig cfg = default_fusion();
    const auto g_s = b.g3d->clone();
    const auto g_t = b.g3d->clone();
    for (std::uint64_t seed : {971u, 972u, 973u, 974u, 975u}) {
        SeededRng rng(seed);
        const LatentCode w3d = sample_latent(*b.g3d, rng);
        const ViewSet views = build_views(w3d, rng, cfg, *g_s, *g_t, *b.g3d);
        const double d = measure_distance(views, *b.embedder, cfg);
        CHECK(d > 0.0);
        CHECK(d < cfg.tau);
    }
}

TEST_CASE("ite_loss selects exactly one branch and keeps both logged") {
    const auto& b = shared_backend();
    SeededRng rng(981);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();
    const auto g_s = perturbed_clone(*b.g3d, "decoder", 0.3, 44);
    const auto g_t = perturbed_clone(*b.g3d, "decoder", 0.15, 45);
    const ViewSet views = build_views(w3d, rng, cfg, *g_s, *g_t, *b.g3d);
    const TextDirection td = text_direction(*b.embedder, cfg);

    const std::uint64_t hash_before = b.embedder->param_hash();
    const FusionState text_state = ite_loss(views, td, 0, *b.embedder);
    const FusionState image_state = ite_loss(views, td, 1, *b.embedder);
    CHECK(b.embedder->param_hash() == hash_before);

    CHECK(text_state.gamma == 0);
    CHECK(image_state.gamma == 1);
    CHECK(text_state.skipped == false);
    CHECK(image_state.skipped == false);
    CHECK(text_state.loss_total == text_state.loss_text);
    CHECK(image_state.loss_total == image_state.loss_image);
    CHECK(text_state.loss_image == image_state.loss_image);
    CHECK(text_state.loss_text == image_state.loss_text);
    CHECK(text_state.loss_image > 0.0);
    CHECK(text_state.loss_text > 0.0);
    CHECK(text_state.loss_image != text_state.loss_text);
    for (double v : {text_state.loss_image, text_state.loss_text,
                     text_state.loss_total, image_state.loss_total}) {
        CHECK(v >= 0.0);
        CHECK(v <= 2.0);
    }
}

TEST_CASE("ite_loss image branch vanishes when train matches style") {
    const auto& b = shared_backend();
    SeededRng rng(991);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();
    const auto g_s = perturbed_clone(*b.g3d, "decoder", 0.3, 46);
    const ViewSet views = build_views(w3d, rng, cfg, *g_s, *g_s, *b.g3d);
    const TextDirection td = text_direction(*b.embedder, cfg);

    const FusionState state = ite_loss(views, td, 1, *b.embedder);
    CHECK(state.loss_image < 1e-12);
    CHECK(state.loss_text > 0.0);
    CHECK(state.loss_total == state.loss_image);
}

TEST_CASE("ite_loss gradient matches finite differences on the train views") {
    const Backend b = make_toy_backend(testsupport::small_config());
    SeededRng rng(1001);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    FusionConfig cfg = default_fusion();
    cfg.n_views = 2;
    const auto g_s = perturbed_clone(*b.g3d, "decoder", 0.3, 47);
    const auto g_t = perturbed_clone(*b.g3d, "decoder", 0.15, 48);
    ViewSet views = build_views(w3d, rng, cfg, *g_s, *g_t, *b.g3d);
    const TextDirection td = text_direction(*b.embedder, cfg);

    const double h = 1e-6;
    for (int gamma : {0, 1}) {
        std::vector<Image> grads;
        const FusionState state = ite_loss(views, td, gamma, *b.embedder, &grads);
        REQUIRE(grads.size() == 2);
        CHECK(state.skipped == false);
        for (int trial = 0; trial < 8; ++trial) {
            const int m = rng.uniform_int(0, 1);
            const Eigen::Index idx =
                rng.uniform_int(0, static_cast<int>(views.train[m].size()) - 1);
            const double x0 = views.train[m].data[idx];
            const double fd = testsupport::central_difference(
                [&](double x) {
                    views.train[m].data[idx] = x;
                    const double v =
                        ite_loss(views, td, gamma, *b.embedder).loss_total;
                    views.train[m].data[idx] = x0;
                    return v;
                },
                x0, h);
            CHECK(testsupport::rel_error(grads[m].data[idx], fd, 1e-9) < 1e-4);
        }
    }
}

TEST_CASE("ite_loss skips the step when the train direction degenerates") {
    const auto& b = shared_backend();
    SeededRng rng(1011);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();
    const TextDirection td = text_direction(*b.embedder, cfg);

    const Image canonical = b.g3d->render(w3d, canonical_pose(cfg.camera));
    ViewSet views;
    for (int i = 0; i < 3; ++i) {
        views.poses.push_back(canonical_pose(cfg.camera));
        views.style.push_back(canonical);
        views.train.push_back(canonical);
        views.source.push_back(canonical);
    }

    std::vector<Image> grads;
    const FusionState state = ite_loss(views, td, 0, *b.embedder, &grads);
    CHECK(state.skipped == true);
    CHECK(state.loss_image == 0.0);
    CHECK(state.loss_text == 0.0);
    CHECK(state.loss_total == 0.0);
    CHECK(grads.empty());

    const FusionState quiet = ite_loss(views, td, 1, *b.embedder);
    CHECK(quiet.skipped == true);
}

TEST_CASE("ite_loss input validation") {
    const auto& b = shared_backend();
    SeededRng rng(1021);
    const LatentCode w3d = sample_latent(*b.g3d, rng);
    const FusionConfig cfg = default_fusion();
    const auto g_t = b.g3d->clone();
    const ViewSet views = build_views(w3d, rng, cfg, *b.g3d, *g_t, *b.g3d);
    const TextDirection td = text_direction(*b.embedder, cfg);

    CHECK_THROWS_AS(ite_loss(views, td, 2, *b.embedder), RangeError);
    CHECK_THROWS_AS(ite_loss(views, td, -1, *b.embedder), RangeError);

    ViewSet empty;
    CHECK_THROWS_AS(ite_loss(empty, td, 0, *b.embedder), DimensionError);

    ViewSet uneven = views;
    uneven.train.pop_back();
    CHECK_THROWS_AS(ite_loss(uneven, td, 0, *b.embedder), DimensionError);
}

TEST_CASE("fusion config validation") {
    FusionConfig cfg = default_fusion();
    CHECK_NOTHROW(cfg.validate());

    FusionConfig bad = cfg;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.tau = 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.xi = 101;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.n_views = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.source_text.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.yaw_range = {10.0, -10.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_SUITE_END();
