// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "stylefuse/camera.hpp"
#include "stylefuse/latent.hpp"
#include "stylefuse/serialize.hpp"
#include "support.hpp"

using namespace stylefuse;

namespace {

LatentCode random_latent(SeededRng& rng, int layers, int width) {
    LatentCode code(layers, width);
    for (Eigen::Index l = 0; l < layers; ++l)
        for (Eigen::Index k = 0; k < width; ++k)
            code.values(l, k) = rng.normal();
    return code;
}

}  // namespace

TEST_SUITE_BEGIN("latent_core");

TEST_CASE("mix_latent masked interpolation") {
    const auto base = LatentCode::constant(18, 512, 1.0);
    const auto injected = LatentCode::constant(18, 512, 0.0);
    const auto out = mix_latent(base, injected, 0.2, LayerRange{13, 18});

    for (int l = 0; l < 12; ++l)
        CHECK(out.values.row(l).isConstant(1.0));
    for (int l = 12; l < 18; ++l)
        for (int k = 0; k < 512; ++k)
            CHECK(out.values(l, k) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("mix_latent identity when both operands equal") {
    SeededRng rng(41);
    const auto w = random_latent(rng, 18, 64);
    const auto out = mix_latent(w, w, 0.2, LayerRange{3, 9});
    // The affine form w*x + (1-w)*x can round one ulp away from x.
    CHECK((out.values - w.values).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mix_latent weight zero selects injected on masked layers") {
    const auto base = LatentCode::constant(14, 512, 1.0);
    const auto injected = LatentCode::constant(14, 512, 2.0);
    const auto out = mix_latent(base, injected, 0.0, LayerRange{9, 13});
    for (int l = 0; l < 14; ++l) {
        const double want = (l >= 8 && l <= 12) ? 2.0 : 1.0;
        CHECK(out.values.row(l).isConstant(want));
    }
}

TEST_CASE("mix_latent agrees with the elementwise oracle and leaves "
          "out-of-range layers bit-identical") {
    SeededRng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int layers = rng.uniform_int(2, 20);
        const int width = rng.uniform_int(1, 48);
        const auto base = random_latent(rng, layers, width);
        const auto injected = random_latent(rng, layers, width);
        const double w = rng.uniform();
        const int lo = rng.uniform_int(1, layers);
        const int hi = rng.uniform_int(lo, layers);

        const auto got = mix_latent(base, injected, w, LayerRange{lo, hi});
        const auto want = testsupport::mix_oracle(base, injected, w, lo, hi);

        for (Eigen::Index l = 0; l < layers; ++l)
            for (Eigen::Index k = 0; k < width; ++k) {
                CHECK(got.values(l, k) == want.values(l, k));
                if (l + 1 < lo || l + 1 > hi)
                    CHECK(got.values(l, k) == base.values(l, k));
            }
    }
}

TEST_CASE("mix_latent error contracts") {
    const auto a = LatentCode::constant(18, 512, 0.5);
    const auto b = LatentCode::constant(14, 512, 0.5);
    CHECK_THROWS_AS(mix_latent(a, b, 0.2, LayerRange{1, 4}), DimensionError);
    CHECK_THROWS_AS(mix_latent(a, a, 0.2, LayerRange{0, 4}), RangeError);
    CHECK_THROWS_AS(mix_latent(a, a, 0.2, LayerRange{4, 19}), RangeError);
    CHECK_THROWS_AS(mix_latent(a, a, 0.2, LayerRange{9, 4}), RangeError);
    CHECK_THROWS_AS(mix_latent(a, a, 1.5, LayerRange{1, 4}), RangeError);
}

TEST_CASE("canonical pose is frontal, pure, and orthonormal") {
    const auto p = canonical_pose();
    CHECK(p.yaw_deg() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.pitch_deg() == doctest::Approx(0.0).epsilon(1e-12));

    const auto q = canonical_pose();
    CHECK(p.flatten() == q.flatten());

    // Orthonormality defect measured directly against R^T R = I.
    CHECK(p.rotation_defect() < 1e-6);
    CHECK(p.intrinsic(2, 2) == 1.0);
    CHECK(p.flatten().size() == 25);
}

TEST_CASE("pose constructors emit orthonormal rotations") {
    SeededRng rng(11);
    for (int i = 0; i < 500; ++i) {
        const double yaw = rng.uniform(-90.0, 90.0);
        const double pitch = rng.uniform(-80.0, 80.0);
        const auto p = pose_from_angles(yaw, pitch);
        CHECK(p.rotation_defect() < 1e-5);
        CHECK(p.yaw_deg() == doctest::Approx(yaw).epsilon(1e-9));
        CHECK(p.pitch_deg() == doctest::Approx(pitch).epsilon(1e-9));
    }
}

TEST_CASE("multiview sampler respects bounds and uniformity") {
    SeededRng rng(123);
    const int n = 10000;
    const auto poses =
        sample_multiview_poses(rng, n, {-50.0, 50.0}, {-30.0, 30.0});
    REQUIRE(poses.size() == static_cast<std::size_t>(n));

    std::vector<double> yaws, pitches;
    for (const auto& p : poses) {
        yaws.push_back(p.yaw_deg());
        pitches.push_back(p.pitch_deg());
        CHECK(p.yaw_deg() >= -50.0);
        CHECK(p.yaw_deg() <= 50.0);
        CHECK(p.pitch_deg() >= -30.0);
        CHECK(p.pitch_deg() <= 30.0);
    }

    const double crit = testsupport::ks_critical(n);
    CHECK(testsupport::ks_statistic_uniform(yaws, -50.0, 50.0) < crit);
    CHECK(testsupport::ks_statistic_uniform(pitches, -30.0, 30.0) < crit);
}

TEST_CASE("multiview sampler determinism and degenerate range") {
    SeededRng a(7), b(7);
    const auto pa = sample_multiview_poses(a, 5, {-50, 50}, {-30, 30});
    const auto pb = sample_multiview_poses(b, 5, {-50, 50}, {-30, 30});
    for (int i = 0; i < 5; ++i) CHECK(pa[i].flatten() == pb[i].flatten());

    SeededRng c(9);
    const auto frontal = sample_multiview_poses(c, 1, {0, 0}, {0, 0});
    CHECK(frontal[0].flatten() == canonical_pose().flatten());

    SeededRng d(9);
    CHECK_THROWS_AS(sample_multiview_poses(d, 1, {10, -10}, {0, 0}),
                    ConfigError);
    CHECK_THROWS_AS(sample_multiview_poses(d, 0, {0, 1}, {0, 1}), ConfigError);
}

TEST_CASE("seeded rng reproducibility and stream independence") {
    SeededRng a(2024), b(2024);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

    SeededRng base(5);
    auto f1 = base.fork(1);
    auto f2 = base.fork(2);
    CHECK(f1.uniform() != f2.uniform());

    auto g1 = base.fork(1);
    CHECK(g1.save_state() == base.fork(1).save_state());

    SeededRng s(99);
    s.uniform();
    s.normal();
    const auto snap = s.save_state();
    const double next = s.uniform();
    SeededRng t(0);
    t.load_state(snap);
    CHECK(t.uniform() == next);
}

TEST_CASE("latent and pose containers round-trip at f32 precision") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "stylefuse_serialize_test";
    fs::create_directories(dir);

    SeededRng rng(3);
    const auto code = random_latent(rng, 14, 32);
    save_latent(dir / "w.sfc", code);
    const auto back = load_latent(dir / "w.sfc");
    REQUIRE(back.layers() == 14);
    REQUIRE(back.width() == 32);
    for (Eigen::Index l = 0; l < 14; ++l)
        for (Eigen::Index k = 0; k < 32; ++k)
            CHECK(back.values(l, k) ==
                  static_cast<double>(static_cast<float>(code.values(l, k))));

    const auto pose = pose_from_angles(17.5, -8.25);
    save_pose(dir / "p.sfc", pose);
    const auto pback = load_pose(dir / "p.sfc");
    CHECK(pback.yaw_deg() == doctest::Approx(17.5).epsilon(1e-5));
    CHECK(pback.pitch_deg() == doctest::Approx(-8.25).epsilon(1e-5));

    // A latent file is not a pose file.
    CHECK_THROWS_AS(load_pose(dir / "w.sfc"), CheckpointError);

    // Corrupted magic is rejected.
    {
        std::FILE* f = std::fopen((dir / "bad.sfc").string().c_str(), "wb");
        std::fputs("NOTAFILE", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_latent(dir / "bad.sfc"), CheckpointError);

    fs::remove_all(dir);
}

TEST_CASE("tensor archive round-trips exactly") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "stylefuse_archive_test";
    fs::create_directories(dir);

    SeededRng rng(8);
    TensorArchive ar;
    ar.entries["alpha"] = Eigen::VectorXd::Random(17);
    ar.entries["beta/gamma"] = Eigen::VectorXd::Random(3);
    ar.save(dir / "a.sft");
    const auto back = TensorArchive::load(dir / "a.sft");
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries.at("alpha") == ar.entries.at("alpha"));
    CHECK(back.entries.at("beta/gamma") == ar.entries.at("beta/gamma"));

    fs::remove_all(dir);
}

TEST_CASE("debug text forms carry dimensions and angles") {
    const auto code = LatentCode::constant(2, 3, 0.25);
    const auto text = latent_to_text(code);
    CHECK(text.find("\"layers\": 2") != std::string::npos);

    const auto pose_text = pose_to_text(pose_from_angles(30.0, 10.0));
    CHECK(pose_text.find("yaw_deg") != std::string::npos);
}

TEST_SUITE_END();
