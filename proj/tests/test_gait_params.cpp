#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gaitkit/gait_params.hpp"
#include "gaitkit/synth.hpp"

using namespace gaitkit;

namespace {

// Kinematics where every channel is an exact linear ramp in time, so
// interpolation and time-averaging have closed forms.
std::vector<KinematicFrame> ramp_kinematics(int frames, double fps) {
    std::vector<KinematicFrame> kin(static_cast<std::size_t>(frames));
    for (int i = 0; i < frames; ++i) {
        const double t = static_cast<double>(i) / fps;
        kin[static_cast<std::size_t>(i)].foot_pos_l = 0.1 + 0.2 * t;
        kin[static_cast<std::size_t>(i)].foot_pos_r = -0.3 + 0.5 * t;
        kin[static_cast<std::size_t>(i)].pelvis_vel = 2.0 + 3.0 * t;
    }
    return kin;
}

EventAnnotations one_left_cycle() {
    EventAnnotations ev;
    ev.lfc = {1.0, 2.1};
    ev.rfo = {1.1};
    ev.rfc = {1.5};
    ev.lfo = {1.7};
    return ev;
}

}  // namespace

TEST_CASE("side names") {
    CHECK(std::string(side_name(Side::Left)) == "left");
    CHECK(std::string(side_name(Side::Right)) == "right");
}

TEST_CASE("a complete interior sequence is promoted to a cycle") {
    const ParsedCycles parsed = parse_cycles(one_left_cycle());
    REQUIRE(parsed.cycles.size() == 1);
    CHECK(parsed.skipped.empty());
    const GaitCycle& c = parsed.cycles[0];
    CHECK(c.side == Side::Left);
    CHECK(c.start == 1.0);
    CHECK(c.end == 2.1);
    CHECK(c.opposite_off == 1.1);
    CHECK(c.opposite_contact == 1.5);
    CHECK(c.own_off == 1.7);
}

TEST_CASE("incomplete spans are skipped with the right reason") {
    EventAnnotations ev = one_left_cycle();
    SUBCASE("missing opposite contact") { ev.rfc = {}; }
    SUBCASE("opposite contact on the span boundary does not count") { ev.rfc = {1.0}; }
    SUBCASE("missing opposite foot off") { ev.rfo = {}; }
    SUBCASE("missing own foot off") { ev.lfo = {}; }
    SUBCASE("duplicate interior event") { ev.rfc = {1.4, 1.6}; }
    SUBCASE("interior events out of order") { ev.rfo = {1.55}; }

    const ParsedCycles parsed = parse_cycles(ev);
    CHECK(parsed.cycles.empty());
    REQUIRE(!parsed.skipped.empty());
    const SkippedSpan& s = parsed.skipped[0];
    CHECK(s.side == Side::Left);
    CHECK(s.start == 1.0);
    CHECK(s.end == 2.1);
    if (ev.rfc.empty() || ev.rfc[0] == 1.0) {
        CHECK(parsed.skipped.size() == 1);
        CHECK(s.reason == "missing opposite contact");
    } else if (ev.rfo.empty()) {
        CHECK(parsed.skipped.size() == 1);
        CHECK(s.reason == "missing opposite foot off");
    } else if (ev.lfo.empty()) {
        CHECK(parsed.skipped.size() == 1);
        CHECK(s.reason == "missing own foot off");
    } else if (ev.rfc.size() == 2) {
        CHECK(s.reason == "duplicate interior event");
        // The doubled right contacts also open a right-side span, which is
        // skipped in turn for want of an interior left contact.
        REQUIRE(parsed.skipped.size() == 2);
        CHECK(parsed.skipped[1].side == Side::Right);
        CHECK(parsed.skipped[1].start == 1.4);
        CHECK(parsed.skipped[1].end == 1.6);
        CHECK(parsed.skipped[1].reason == "missing opposite contact");
    } else {
        CHECK(parsed.skipped.size() == 1);
        CHECK(s.reason == "interior events out of order");
    }
}

TEST_CASE("both sides are parsed and cycles come out sorted by start") {
    // Steady alternating pattern, one second per cycle starting at lfc = 0.25.
    EventAnnotations ev;
    for (int k = 0; k < 4; ++k) {
        const double base = 0.25 + k;
        ev.lfc.push_back(base);
        ev.rfo.push_back(base + 0.12);
        ev.rfc.push_back(base + 0.50);
        ev.lfo.push_back(base + 0.62);
    }
    const ParsedCycles parsed = parse_cycles(ev);
    CHECK(parsed.skipped.empty());
    REQUIRE(parsed.cycles.size() == 6);  // 3 left + 3 right
    for (std::size_t i = 1; i < parsed.cycles.size(); ++i) {
        CHECK(parsed.cycles[i].start > parsed.cycles[i - 1].start);
    }
    CHECK(parsed.cycles[0].side == Side::Left);
    CHECK(parsed.cycles[1].side == Side::Right);
    // A right cycle runs rfc -> lfo -> lfc -> rfo -> rfc.
    const GaitCycle& r = parsed.cycles[1];
    CHECK(r.start == doctest::Approx(0.75));
    CHECK(r.opposite_off == doctest::Approx(0.87));
    CHECK(r.opposite_contact == doctest::Approx(1.25));
    CHECK(r.own_off == doctest::Approx(1.37));
    CHECK(r.end == doctest::Approx(1.75));
}

TEST_CASE("parameters have their closed-form values on ramp kinematics") {
    const double fps = 10.0;
    const auto kin = ramp_kinematics(31, fps);  // spans [0, 3] s
    const GaitCycle c = parse_cycles(one_left_cycle()).cycles[0];
    const GaitCycleParams p = extract_parameters(c, kin, fps);

    CHECK(p.side == Side::Left);
    CHECK(p.cadence_spm == doctest::Approx(120.0 / 1.1).epsilon(1e-12));
    CHECK(p.step_time_s == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.double_stance_s == doctest::Approx(0.1 + 0.2).epsilon(1e-12));
    CHECK(p.single_support_s == doctest::Approx(0.4).epsilon(1e-12));
    // Mean of the linear ramp 2 + 3t over [1.0, 2.1].
    CHECK(p.velocity_mps == doctest::Approx(2.0 + 3.0 * 1.55).epsilon(1e-12));
    // Foot separation at the opposite (right) contact, t = 1.5.
    CHECK(p.step_length_m == doctest::Approx(std::abs(0.45 - 0.4)).epsilon(1e-9));
    REQUIRE(p.step_length_start_m.has_value());
    CHECK(*p.step_length_start_m == doctest::Approx(std::abs(0.3 - 0.2)).epsilon(1e-9));
}

TEST_CASE("stance identities hold exactly on oracle events") {
    GaitSpec spec;
    spec.cadence_spm = 96.0;
    spec.duration_s = 6.0;
    spec.seed = 21;
    const Trial t = generate(spec);
    const ParsedCycles parsed = parse_cycles(*t.gt_events);
    CHECK(parsed.skipped.empty());
    REQUIRE(parsed.cycles.size() >= 4);
    for (const GaitCycle& c : parsed.cycles) {
        const GaitCycleParams p = extract_parameters(c, *t.gt_kinematics, t.fps);
        const double cycle_s = c.end - c.start;
        CHECK(p.double_stance_s + 2.0 * p.single_support_s ==
              doctest::Approx(cycle_s).epsilon(1e-9));
        // Symmetric gait: each step takes half a cycle.
        CHECK(p.cadence_spm * p.step_time_s == doctest::Approx(60.0).epsilon(1e-9));
        CHECK(p.cadence_spm == doctest::Approx(96.0).epsilon(1e-9));
        CHECK(p.velocity_mps ==
              doctest::Approx(spec.step_length_m * spec.cadence_spm / 60.0).epsilon(1e-9));
        CHECK(p.step_length_m == doctest::Approx(spec.step_length_m).epsilon(0.02));
    }
}

TEST_CASE("extraction validates its inputs") {
    const auto kin = ramp_kinematics(31, 10.0);
    GaitCycle c = parse_cycles(one_left_cycle()).cycles[0];

    CHECK_THROWS_AS(extract_parameters(c, {}, 10.0), DataError);
    CHECK_THROWS_AS(extract_parameters(c, kin, 0.0), DataError);
    CHECK_THROWS_AS(extract_parameters(c, kin, std::nan("")), DataError);

    c.end = 3.5;  // past the kinematics span
    CHECK_THROWS_AS(extract_parameters(c, kin, 10.0), DataError);

    c = parse_cycles(one_left_cycle()).cycles[0];
    auto bad = kin;
    bad[15].pelvis_vel = std::nan("");
    CHECK_THROWS_AS(extract_parameters(c, bad, 10.0), DataError);
}

TEST_CASE("params tsv emits one fixed-precision row per cycle") {
    GaitCycleParams p;
    p.side = Side::Left;
    p.start = 1.0;
    p.end = 2.1;
    p.cadence_spm = 120.0 / 1.1;
    p.step_time_s = 0.5;
    p.step_length_m = 0.05;
    p.velocity_mps = 6.65;
    p.double_stance_s = 0.3;
    p.single_support_s = 0.4;

    std::ostringstream os;
    write_params_tsv(os, "trial-7", {p}, "oracle");
    CHECK(os.str() ==
          "trial_id\tside\tstart_s\tend_s\tcadence_spm\tstep_time_s\tstep_length_m\t"
          "velocity_mps\tdouble_stance_s\tsingle_support_s\tsource\n"
          "trial-7\tleft\t1.000000\t2.100000\t109.090909\t0.500000\t0.050000\t6.650000\t"
          "0.300000\t0.400000\toracle\n");

    std::ostringstream os2;
    write_params_tsv(os2, "trial-7", {p}, "truth", false);
    CHECK(os2.str().find("trial_id") == std::string::npos);
}
