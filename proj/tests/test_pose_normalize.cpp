#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "gaitkit/pose_normalize.hpp"
#include "gaitkit/random.hpp"
#include "gaitkit/synth.hpp"

using namespace gaitkit;

namespace {

Eigen::Matrix3d yaw_matrix(double angle) {
    return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

Skeleton canonical_frame() {
    Skeleton s;
    s[Joint::HipL] = Vec3(-0.12, 1.0, 0.0);
    s[Joint::HipR] = Vec3(0.12, 1.0, 0.0);
    s[Joint::MidHip] = Vec3(0.0, 1.0, 0.0);
    s[Joint::Sternum] = Vec3(0.0, 1.45, 0.0);
    s[Joint::KneeL] = Vec3(-0.12, 0.55, 0.05);
    s[Joint::KneeR] = Vec3(0.12, 0.55, -0.03);
    s[Joint::AnkleL] = Vec3(-0.12, 0.12, 0.12);
    s[Joint::AnkleR] = Vec3(0.12, 0.12, -0.10);
    s[Joint::ToeL] = Vec3(-0.12, 0.02, 0.30);
    s[Joint::ToeR] = Vec3(0.12, 0.02, -0.25);
    return s;
}

Skeleton transformed(const Skeleton& s, const Eigen::Matrix3d& r, const Vec3& c) {
    Skeleton out;
    for (int j = 0; j < kJointCount; ++j) {
        out.joints[static_cast<std::size_t>(j)] =
            r * s.joints[static_cast<std::size_t>(j)] + c;
    }
    return out;
}

Trial walking_trial(std::uint64_t seed) {
    GaitSpec spec;
    spec.seed = seed;
    spec.duration_s = 3.0;
    return generate(spec);
}

}  // namespace

TEST_CASE("canonical frame maps to the identity rotation") {
    const Eigen::Matrix3d r = canonical_rotation(canonical_frame());
    CHECK((r - Eigen::Matrix3d::Identity()).norm() < 1e-9);
}

TEST_CASE("a yawed frame is rotated back") {
    const double yaw = 30.0 * std::numbers::pi / 180.0;
    const Skeleton yawed = transformed(canonical_frame(), yaw_matrix(yaw), Vec3::Zero());
    const Eigen::Matrix3d r = canonical_rotation(yawed);
    CHECK((r - yaw_matrix(yaw).transpose()).norm() < 1e-9);
}

TEST_CASE("canonical_rotation postconditions hold for random frames") {
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        Skeleton s = canonical_frame();
        for (auto& joint : s.joints) {
            joint += Vec3(rng.normal(0, 0.03), rng.normal(0, 0.03), rng.normal(0, 0.03));
        }
        const Eigen::Matrix3d world =
            (Eigen::AngleAxisd(rng.uniform(-3.0, 3.0), Eigen::Vector3d::UnitY()) *
             Eigen::AngleAxisd(rng.uniform(-0.4, 0.4), Eigen::Vector3d::UnitZ()))
                .toRotationMatrix();
        s = transformed(s, world, Vec3(rng.normal(0, 1), 0, rng.normal(0, 1)));

        const Eigen::Matrix3d r = canonical_rotation(s);
        CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-9);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));

        const Vec3 hips = r * (s[Joint::HipL] - s[Joint::HipR]);
        CHECK(std::abs(hips.z()) < 1e-9);
        const Vec3 torso = r * (s[Joint::Sternum] - s[Joint::MidHip]);
        CHECK(std::abs(torso.x()) < 1e-9);
        CHECK(torso.y() > 0.0);
    }
}

TEST_CASE("degenerate joint pairs are rejected") {
    Skeleton s = canonical_frame();
    SUBCASE("coincident hips") {
        s[Joint::HipL] = s[Joint::HipR];
        CHECK_THROWS_AS(canonical_rotation(s), DataError);
    }
    SUBCASE("coincident torso") {
        s[Joint::Sternum] = s[Joint::MidHip];
        CHECK_THROWS_AS(canonical_rotation(s), DataError);
    }
}

TEST_CASE("constant sequences normalize to constant outputs") {
    Trial t;
    t.id = "const";
    t.subject_height = 1.7;
    t.fps = 30;
    t.frames = {canonical_frame(), canonical_frame(), canonical_frame()};
    const auto poses = normalize_sequence(t);
    REQUIRE(poses.size() == 3);
    for (int j = 0; j < kJointCount; ++j) {
        CHECK((poses[1].joints[static_cast<std::size_t>(j)] -
               poses[0].joints[static_cast<std::size_t>(j)])
                  .norm() == 0.0);
        CHECK((poses[2].joints[static_cast<std::size_t>(j)] -
               poses[0].joints[static_cast<std::size_t>(j)])
                  .norm() == 0.0);
    }
}

TEST_CASE("normalization is invariant to world yaw and translation") {
    const Trial base = walking_trial(11);
    Rng rng(3);
    for (int rep = 0; rep < 5; ++rep) {
        const Eigen::Matrix3d r = yaw_matrix(rng.uniform(-3.0, 3.0));
        const Vec3 c(rng.normal(0, 5), rng.normal(0, 0.5), rng.normal(0, 5));
        Trial moved = base;
        for (Skeleton& frame : moved.frames) {
            frame = transformed(frame, r, c);
        }
        const auto a = normalize_sequence(base);
        const auto b = normalize_sequence(moved);
        REQUIRE(a.size() == b.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (int j = 0; j < kJointCount; ++j) {
                worst = std::max(worst, (a[i].joints[static_cast<std::size_t>(j)] -
                                         b[i].joints[static_cast<std::size_t>(j)])
                                            .norm());
            }
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("normalization preserves inter-joint distances and centers the pelvis") {
    const Trial t = walking_trial(5);
    const auto poses = normalize_sequence(t);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        CHECK(poses[i][Joint::MidHip].norm() < 1e-12);
        const double before =
            (t.frames[i][Joint::KneeL] - t.frames[i][Joint::ToeR]).norm();
        const double after = (poses[i][Joint::KneeL] - poses[i][Joint::ToeR]).norm();
        CHECK(after == doctest::Approx(before).epsilon(1e-9));
    }
}

TEST_CASE("first-frame mode reuses one rotation") {
    Trial t = walking_trial(9);
    // Yaw only the later frames; first-frame mode must not react.
    const auto per_frame = normalize_sequence(t, NormalizeMode::PerFrame);
    const auto first = normalize_sequence(t, NormalizeMode::FirstFrame);
    REQUIRE(per_frame.size() == first.size());
    CHECK((first[0].rotation - per_frame[0].rotation).norm() < 1e-12);
    for (std::size_t i = 1; i < first.size(); ++i) {
        CHECK((first[i].rotation - first[0].rotation).norm() == 0.0);
    }
}
