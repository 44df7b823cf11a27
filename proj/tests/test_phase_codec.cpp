#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gaitkit/phase_codec.hpp"
#include "gaitkit/random.hpp"

using namespace gaitkit;

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_to_pi(double phi) {
    double w = std::remainder(phi, kTwoPi);
    if (w <= -kPi) {
        w += kTwoPi;
    }
    return w;
}
}  // namespace

TEST_CASE("event_phase interpolates between a bracketing pair") {
    const std::vector<double> events{1.0, 2.0};
    CHECK(event_phase(events, {}, 1.5) == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(event_phase(events, {}, 1.0) == doctest::Approx(0.0));
    CHECK(event_phase(events, {}, 2.0) == doctest::Approx(kTwoPi));
}

TEST_CASE("event_phase is affine between events and puts event k at 2*pi*k") {
    const std::vector<double> events{0.5, 1.5, 3.5};
    CHECK(event_phase(events, {}, 1.5) == doctest::Approx(kTwoPi));
    CHECK(event_phase(events, {}, 3.5) == doctest::Approx(2.0 * kTwoPi));
    CHECK(event_phase(events, {}, 2.5) == doctest::Approx(1.5 * kTwoPi));
    // Extrapolation continues the nearest pair's slope.
    CHECK(event_phase(events, {}, 0.0) == doctest::Approx(-0.5 * kTwoPi));
    CHECK(event_phase(events, {}, 4.5) == doctest::Approx(2.5 * kTwoPi));
}

TEST_CASE("single event falls back to the same-side contact period") {
    // One event at 0.8 s, contacts 1.0 s apart: phase slope is 2*pi per second.
    CHECK(event_phase({0.8}, {0.0, 1.0}, 1.3) == doctest::Approx(kPi));
    CHECK(event_phase({0.8}, {0.0, 1.0}, 0.8) == doctest::Approx(0.0));
}

TEST_CASE("event_phase error cases") {
    CHECK_THROWS_AS(event_phase({}, {0.0, 1.0}, 0.5), DataError);
    CHECK_THROWS_AS(event_phase({0.8}, {1.0}, 0.5), DataError);
    CHECK_THROWS_AS(event_phase({0.8}, {1.0, 1.0}, 0.5), DataError);
}

TEST_CASE("loss_weight is 1 inside, linear outside, 0 beyond 1 s") {
    CHECK(loss_weight(1.5, 1.0, 2.0) == 1.0);
    CHECK(loss_weight(1.0, 1.0, 2.0) == 1.0);
    CHECK(loss_weight(2.0, 1.0, 2.0) == 1.0);
    CHECK(loss_weight(2.5, 1.0, 2.0) == doctest::Approx(0.5));
    CHECK(loss_weight(0.5, 1.0, 2.0) == doctest::Approx(0.5));
    CHECK(loss_weight(-0.5, 1.0, 2.0) == 0.0);
    CHECK(loss_weight(3.1, 1.0, 2.0) == 0.0);
}

TEST_CASE("decode fixes quadrant and ignores magnitude") {
    PhaseFrame f;
    f.q = {0.0, 1.0, -1.0, 0.0, 0.6 * std::cos(2.5), 0.6 * std::sin(2.5), 1.0, 0.0};
    const auto phi = decode(f);
    CHECK(phi[0] == doctest::Approx(kPi / 2));
    CHECK(phi[1] == doctest::Approx(kPi));
    CHECK(phi[2] == doctest::Approx(2.5));
    CHECK(phi[3] == doctest::Approx(0.0));
}

TEST_CASE("decode rejects a degenerate pair") {
    PhaseFrame f;
    f.q = {0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0};
    CHECK_THROWS_AS(decode(f), NumericError);
}

TEST_CASE("decode(encode) reproduces the phase mod 2*pi") {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        const double phi = rng.uniform(-30.0, 30.0);
        const double mag = rng.uniform(0.1, 3.0);
        PhaseFrame f;
        for (int e = 0; e < kEventTypes; ++e) {
            f.q[static_cast<std::size_t>(2 * e)] = mag * std::cos(phi);
            f.q[static_cast<std::size_t>(2 * e + 1)] = mag * std::sin(phi);
        }
        const auto out = decode(f);
        for (int e = 0; e < kEventTypes; ++e) {
            CHECK(std::abs(wrap_to_pi(out[static_cast<std::size_t>(e)] - phi)) < 1e-9);
        }
    }
}

TEST_CASE("encode produces unit quadrature, interior weights 1") {
    EventAnnotations ev;
    ev.lfc = {0.0, 1.0, 2.0};
    ev.rfc = {0.5, 1.5};
    ev.lfo = {0.7, 1.7};
    ev.rfo = {0.2, 1.2};
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) {
        times.push_back(0.1 * i);
    }
    const EncodedPhases enc = encode(ev, times);
    REQUIRE(enc.frames.size() == times.size());
    REQUIRE(enc.targets.phases.rows() == static_cast<Eigen::Index>(times.size()));

    for (std::size_t t = 0; t < times.size(); ++t) {
        for (int e = 0; e < kEventTypes; ++e) {
            const double c = enc.frames[t].q[static_cast<std::size_t>(2 * e)];
            const double s = enc.frames[t].q[static_cast<std::size_t>(2 * e + 1)];
            CHECK(std::abs(c * c + s * s - 1.0) < 1e-9);
            // Quadrature pair encodes the unwrapped phase target.
            const double phi = enc.targets.phases(static_cast<Eigen::Index>(t), e);
            CHECK(std::abs(wrap_to_pi(std::atan2(s, c) - phi)) < 1e-9);
        }
    }
    // lfc events span [0, 2]: every sampled time is inside, weight 1.
    for (std::size_t t = 0; t < times.size(); ++t) {
        CHECK(enc.targets.weights(static_cast<Eigen::Index>(t), 0) == 1.0);
    }
    // rfc events span [0.5, 1.5]: t=0 is 0.5 s outside.
    CHECK(enc.targets.weights(0, 1) == doctest::Approx(0.5));
    CHECK(enc.targets.weights(10, 1) == 1.0);
    CHECK(enc.targets.weights(20, 1) == doctest::Approx(0.5));
}

TEST_CASE("phase targets are unwrapped and monotone") {
    EventAnnotations ev;
    ev.lfc = {0.0, 1.0, 2.0, 3.0};
    ev.rfc = {0.5, 1.5, 2.5};
    ev.lfo = {0.6, 1.6, 2.6};
    ev.rfo = {0.1, 1.1, 2.1};
    std::vector<double> times;
    for (int i = 0; i <= 60; ++i) {
        times.push_back(0.05 * i);
    }
    const EncodedPhases enc = encode(ev, times);
    for (int e = 0; e < kEventTypes; ++e) {
        for (Eigen::Index t = 1; t < enc.targets.phases.rows(); ++t) {
            CHECK(enc.targets.phases(t, e) > enc.targets.phases(t - 1, e));
        }
    }
}
