#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gaitkit/core.hpp"

using namespace gaitkit;
namespace fs = std::filesystem;

namespace {

Skeleton spread_skeleton(double scale) {
    Skeleton s;
    for (int j = 0; j < kJointCount; ++j) {
        s.joints[static_cast<std::size_t>(j)] =
            Vec3(0.1 * j, 1.0 - 0.05 * j, scale + 0.01 * j);
    }
    // Keep the synthetic-data invariant: mid hip is the hip midpoint.
    s[Joint::MidHip] = 0.5 * (s[Joint::HipL] + s[Joint::HipR]);
    return s;
}

Trial minimal_trial() {
    Trial t;
    t.id = "t0";
    t.subject_height = 1.70;
    t.fps = 30.0;
    t.frames = {spread_skeleton(0.0), spread_skeleton(0.05)};
    return t;
}

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("forward_component projects onto +Z only") {
    CHECK(forward_component(Vec3(0, 0, 1.2), Vec3(0, 0, 0.2)) == doctest::Approx(1.0));
    const Vec3 v(0.3, -0.7, 2.5);
    CHECK(forward_component(v, v) == 0.0);
    CHECK(forward_component(Vec3(1, 2, 0.5), Vec3(9, 9, 0.5)) == 0.0);
}

TEST_CASE("kinematic channels round-trip by index") {
    KinematicFrame f;
    for (int c = 0; c < KinematicFrame::kChannels; ++c) {
        f.set_channel(c, 1.5 * c - 3.0);
    }
    for (int c = 0; c < KinematicFrame::kChannels; ++c) {
        CHECK(f.channel(c) == 1.5 * c - 3.0);
    }
    CHECK(f.hip_flex_l == f.channel(0));
    CHECK(f.foot_vel_r == f.channel(8));
    CHECK_THROWS_AS(f.channel(9), std::out_of_range);
}

TEST_CASE("event lists are indexed in codec order") {
    EventAnnotations ev;
    ev.lfc = {0.1};
    ev.rfc = {0.2};
    ev.lfo = {0.3};
    ev.rfo = {0.4};
    CHECK(ev.list(0) == std::vector<double>{0.1});
    CHECK(ev.list(1) == std::vector<double>{0.2});
    CHECK(ev.list(2) == std::vector<double>{0.3});
    CHECK(ev.list(3) == std::vector<double>{0.4});
    CHECK(event_type_names()[0] == "lfc");
    CHECK(event_type_names()[3] == "rfo");
}

TEST_CASE("validate_trial accepts a minimal valid trial") {
    CHECK_NOTHROW(validate_trial(minimal_trial()));
}

TEST_CASE("validate_trial names the offending field") {
    Trial t = minimal_trial();

    SUBCASE("fps") {
        t.fps = 0.0;
        CHECK_THROWS_WITH_AS(validate_trial(t), doctest::Contains("fps"), DataError);
    }
    SUBCASE("height") {
        t.subject_height = 2.6;
        CHECK_THROWS_WITH_AS(validate_trial(t), doctest::Contains("height"), DataError);
    }
    SUBCASE("empty frames") {
        t.frames.clear();
        CHECK_THROWS_WITH_AS(validate_trial(t), doctest::Contains("frames"), DataError);
    }
    SUBCASE("non-finite joint") {
        t.frames[1][Joint::KneeL].y() = std::nan("");
        CHECK_THROWS_AS(validate_trial(t), DataError);
    }
    SUBCASE("kinematics length mismatch") {
        t.gt_kinematics = std::vector<KinematicFrame>(1);
        CHECK_THROWS_WITH_AS(validate_trial(t), doctest::Contains("kinematics"), DataError);
    }
    SUBCASE("event outside the recording") {
        EventAnnotations ev;
        ev.lfc = {t.duration() + 0.5};
        t.gt_events = ev;
        CHECK_THROWS_AS(validate_trial(t), DataError);
    }
    SUBCASE("unsorted events") {
        EventAnnotations ev;
        // duration of the 2-frame trial is 1/30 s, so stretch the trial first
        t.frames.assign(200, t.frames[0]);
        ev.lfc = {1.0, 0.5};
        t.gt_events = ev;
        CHECK_THROWS_AS(validate_trial(t), DataError);
    }
    SUBCASE("implausibly close same-type events") {
        t.frames.assign(200, t.frames[0]);
        EventAnnotations ev;
        ev.rfo = {1.0, 1.1};
        t.gt_events = ev;
        CHECK_THROWS_AS(validate_trial(t), DataError);
    }
}

TEST_CASE("save and load round-trip bitwise, with and without optionals") {
    Trial t = minimal_trial();
    t.frames[0][Joint::ToeL] = Vec3(0.1234567890123456, -2.0 / 3.0, 1e-17);

    SUBCASE("without optionals") {}
    SUBCASE("with ground truth") {
        t.frames.assign(100, t.frames[0]);
        std::vector<KinematicFrame> kin(t.frames.size());
        for (std::size_t i = 0; i < kin.size(); ++i) {
            kin[i].set_channel(0, std::sqrt(static_cast<double>(i) + 2.0));
            kin[i].set_channel(6, 1.0 / 3.0);
        }
        t.gt_kinematics = kin;
        EventAnnotations ev;
        ev.lfc = {0.1, 1.1};
        ev.rfc = {0.6};
        ev.lfo = {0.9};
        ev.rfo = {0.3, 2.2};
        t.gt_events = ev;
    }

    const fs::path path = temp_file("gaitkit_core_roundtrip.json");
    save_trial(t, path);
    const Trial back = load_trial(path);
    fs::remove(path);

    CHECK(back.id == t.id);
    CHECK(back.subject_height == t.subject_height);
    CHECK(back.fps == t.fps);
    REQUIRE(back.frames.size() == t.frames.size());
    for (std::size_t i = 0; i < t.frames.size(); ++i) {
        for (int j = 0; j < kJointCount; ++j) {
            CHECK(back.frames[i].joints[static_cast<std::size_t>(j)] ==
                  t.frames[i].joints[static_cast<std::size_t>(j)]);
        }
    }
    CHECK(back.gt_kinematics.has_value() == t.gt_kinematics.has_value());
    if (t.gt_kinematics.has_value()) {
        for (std::size_t i = 0; i < t.gt_kinematics->size(); ++i) {
            for (int c = 0; c < KinematicFrame::kChannels; ++c) {
                CHECK((*back.gt_kinematics)[i].channel(c) ==
                      (*t.gt_kinematics)[i].channel(c));
            }
        }
    }
    CHECK(back.gt_events.has_value() == t.gt_events.has_value());
    if (t.gt_events.has_value()) {
        for (int e = 0; e < kEventTypes; ++e) {
            CHECK(back.gt_events->list(e) == t.gt_events->list(e));
        }
    }
}

TEST_CASE("load_trial rejects bad files") {
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_trial("/nonexistent/trial.json"), DataError);
    }
    SUBCASE("wrong joint count") {
        const fs::path path = temp_file("gaitkit_core_badjoints.json");
        {
            std::ofstream out(path);
            out << R"({"id":"x","height_m":1.7,"fps":30,"joint_names":[],)"
                << R"("frames":[[[0,0,0],[0,1,0],[1,0,0],[2,0,0],[0,0,1],[1,1,1],)"
                << R"([2,2,2],[3,3,3],[4,4,4]]]})";
        }
        CHECK_THROWS_WITH_AS(load_trial(path), doctest::Contains("joint"), DataError);
        fs::remove(path);
    }
    SUBCASE("not json") {
        const fs::path path = temp_file("gaitkit_core_notjson.json");
        {
            std::ofstream out(path);
            out << "not a json document";
        }
        CHECK_THROWS_AS(load_trial(path), DataError);
        fs::remove(path);
    }
}
