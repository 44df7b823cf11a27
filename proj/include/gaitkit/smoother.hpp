#pragma once

#include <Eigen/Dense>
#include <optional>
#include <ostream>
#include <vector>

#include "gaitkit/core.hpp"
#include "gaitkit/phase_codec.hpp"

namespace gaitkit {

// State-space smoothing of the 8 quadrature phase signals.
//
// State x = [omega, omega_dot, psi1, psi2, psi3]:
//   omega     unwrapped gait phase, referenced to left foot contact (rad)
//   omega_dot phase rate (rad/s)
//   psi_i     phase offsets of the other three event streams relative to
//             omega (rfc, lfo, rfo); the lfc offset is identically zero.

struct SmootherConfig {
    Eigen::Matrix<double, 5, 5> Q;   // process noise added per step
    Eigen::Matrix<double, 8, 8> R;   // observation noise
    Eigen::Matrix<double, 5, 5> P0;  // initial covariance
    double min_cadence = 0.5;        // floor on omega_dot (rad/s)

    SmootherConfig() {
        Q = Eigen::Matrix<double, 5, 5>::Zero();
        Q.diagonal() << 0.5, 0.5, 0.1, 0.1, 0.1;
        R = Eigen::Matrix<double, 8, 8>::Identity();
        P0 = Eigen::Matrix<double, 5, 5>::Identity();
    }
};

struct SmootherState {
    Eigen::Matrix<double, 5, 1> x = Eigen::Matrix<double, 5, 1>::Zero();
    Eigen::Matrix<double, 5, 5> P = Eigen::Matrix<double, 5, 5>::Identity();
};

// Observation model output: expected quadrature vector and its Jacobian.
struct PhaseObservation {
    Eigen::Matrix<double, 8, 1> y;
    Eigen::Matrix<double, 8, 5> H;
};

// Detected foot events; stream i of the smoother state maps directly to
// event type i (lfc, rfc, lfo, rfo), so each list identifies its own type.
struct DetectedEvents {
    EventAnnotations events;
};

// x <- F x, P <- F P F^T + Q with F = identity except F(omega, omega_dot) = dt.
SmootherState predict(const SmootherState& state, double dt, const SmootherConfig& cfg);

// Expected observation [cos w, sin w, cos(w+psi1), sin(w+psi1), ...] and the
// 8x5 Jacobian (the omega_dot column is zero).
PhaseObservation observe(const Eigen::Matrix<double, 5, 1>& x);

// Extended Kalman forward pass followed by a Rauch-Tung-Striebel backward
// pass. observations is T x 8 (T >= 2 rows of quadrature pairs); omega_dot is
// clamped to >= cfg.min_cadence after every update and backward step. When no
// init state is given, omega/psi start from the first frame's decoded phases
// and omega_dot from the median per-frame phase increment.
// Throws NumericError (naming the frame) if a covariance stops being
// positive definite even after symmetrization and a jitter retry.
std::vector<SmootherState> smooth(const Eigen::MatrixXd& observations, double dt,
                                  const SmootherConfig& cfg = SmootherConfig(),
                                  const std::optional<SmootherState>& init = std::nullopt);

// Convenience: pack model phase frames into the T x 8 observation matrix.
Eigen::MatrixXd phase_matrix(const std::vector<PhaseFrame>& frames);

// Sub-frame event detection: each of the four phase streams
// theta_0 = omega, theta_i = omega + psi_i emits an event wherever it
// crosses a multiple of 2*pi, with the time interpolated linearly between
// the bracketing samples. Events closer than 0.2 s to a previous same-type
// event are suppressed.
DetectedEvents detect_events(const std::vector<SmootherState>& smoothed, double dt);

// Mean squared difference between the observations and the re-projected
// smoothed states; a cheap input-quality score.
double reconstruction_residual(const Eigen::MatrixXd& observations,
                               const std::vector<SmootherState>& smoothed);

// Tab-separated export with columns event_type, time_s, source, trial_id.
// Either list may be null; detected rows come first.
void write_events_tsv(std::ostream& os, const std::string& trial_id,
                      const DetectedEvents* detected, const EventAnnotations* ground_truth,
                      bool header = true);

}  // namespace gaitkit
