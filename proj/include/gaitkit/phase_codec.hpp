#pragma once

#include "gaitkit/core.hpp"

#include <Eigen/Core>

#include <array>
#include <vector>

// Conversion between event annotations, per-frame gait phases, quadrature
// encodings, and training-loss weights.
//
// Phases are kept unwrapped (monotone across the trial) and only wrapped when
// encoded as (cos, sin) pairs. Event order everywhere: lfc, rfc, lfo, rfo.

namespace gaitkit {

/// 8 quadrature values for one frame:
/// [cos lfc, sin lfc, cos rfc, sin rfc, cos lfo, sin lfo, cos rfo, sin rfo].
struct PhaseFrame {
    std::array<double, 2 * kEventTypes> q{};
};

/// Per-frame unwrapped phases and loss weights, one column per event type.
struct PhaseTargets {
    Eigen::MatrixXd phases;   // T x 4, radians, unwrapped
    Eigen::MatrixXd weights;  // T x 4, in [0, 1]
};

struct EncodedPhases {
    PhaseTargets targets;
    std::vector<PhaseFrame> frames;
};

/// Unwrapped phase of one event stream at time t.
///
/// With two or more events the bracketing (or nearest) consecutive pair
/// defines the phase, accumulated so that the k-th event sits at exactly
/// 2*pi*k; outside the annotated range the nearest pair extrapolates
/// linearly. With a single event the denominator falls back to the period of
/// the adjacent same-side contact pair.
double event_phase(const std::vector<double>& event_times,
                   const std::vector<double>& same_side_contacts, double t);

/// 1 on [t0, t1], decaying linearly to 0 at one second outside the interval.
double loss_weight(double t, double t0, double t1);

/// Phases, weights, and quadrature frames for every sample time.
EncodedPhases encode(const EventAnnotations& events, const std::vector<double>& times);

/// Per-event phase in (-pi, pi] via the two-argument arctangent.
/// Magnitude of the quadrature pair is ignored; a (0, 0) pair is an error.
std::array<double, kEventTypes> decode(const PhaseFrame& frame);

}  // namespace gaitkit
