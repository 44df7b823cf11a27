#pragma once

#include "gaitkit/core.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Deterministic synthetic gait generator. Produces Trials with exact
// ground-truth kinematics and event times so downstream modules can be tested
// against commanded values instead of a private clinical dataset.
//
// Construction guarantees, relied on by tests:
//   * feet are world-stationary in stance (zero forward velocity), so foot
//     contact/off semantics are exact
//   * gt foot velocities are forward differences of toe position, so the
//     physical-consistency error is zero by construction
//   * pelvis advances at exactly step_length * cadence / 60 m/s
//   * joint noise perturbs frames only, never the ground truth; mid_hip is
//     re-derived as the hip midpoint so the skeleton invariant survives noise

namespace gaitkit {

struct GaitSpec {
    double cadence_spm = 110.0;   // steps per minute, two steps per cycle
    double step_length_m = 0.6;
    double height_m = 1.70;
    double duration_s = 5.0;
    double fps = 30.0;
    // Event timing as fractions of the gait cycle, measured from left foot
    // contact. Must satisfy 0 < rfo < rfc < lfo < 1.
    double rfo_fraction = 0.12;
    double rfc_fraction = 0.50;
    double lfo_fraction = 0.62;
    double asymmetry = 1.0;       // left/right step-time ratio
    double noise_sigma_m = 0.0;   // isotropic joint noise on frames
    std::uint64_t seed = 0;
    std::string id = "synth";
};

/// Throws DataError when the spec violates its invariants or the commanded
/// step length exceeds leg reach for the commanded height.
void validate_spec(const GaitSpec& spec);

Trial generate(const GaitSpec& spec);

struct SpecRanges {
    std::pair<double, double> cadence_spm{60.0, 140.0};
    std::pair<double, double> step_length_m{0.35, 0.70};
    std::pair<double, double> height_m{1.50, 1.95};
    std::pair<double, double> duration_s{4.0, 6.0};
    std::pair<double, double> asymmetry{1.0, 1.0};
    double noise_sigma_m = 0.0;
    double fps = 30.0;
    std::string id_prefix = "synth";
};

/// n specs drawn uniformly from the ranges, reproducible from the seed.
std::vector<GaitSpec> draw_specs(int n, const SpecRanges& ranges, std::uint64_t seed);

std::vector<Trial> make_dataset(int n, const SpecRanges& ranges, std::uint64_t seed);

}  // namespace gaitkit
