#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "gaitkit/core.hpp"

// Joint camera calibration and video-to-mocap temporal offset recovery by
// minimizing a confidence-weighted Huber reprojection loss, plus the trial
// screening predicate applied before analysis.

namespace gaitkit {

inline constexpr int kSyncJoints = 6;  // hips, knees, ankles

struct CameraModel {
    double fx = 1.0, fy = 1.0;  // focal lengths, pixels
    double cx = 0.0, cy = 0.0;  // principal point, pixels
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Observed 2D keypoints at video rate plus 3D mocap at its own rate.
// keypoints: T_v x 18, per joint (u, v, confidence).
// mocap:     T_m x 18, per joint (x, y, z).
struct SyncProblem {
    Eigen::MatrixXd keypoints;
    Eigen::MatrixXd mocap;
    double video_fps = 30.0;
    double mocap_hz = 120.0;
    double initial_offset = 0.0;  // seconds, starting point for optimization
};

void validate_problem(const SyncProblem& problem);
SyncProblem load_sync_problem(const std::filesystem::path& path);
void save_sync_problem(const SyncProblem& problem, const std::filesystem::path& path);

struct SyncResult {
    CameraModel camera;
    double offset = 0.0;      // seconds
    double mean_huber = 0.0;  // final confidence-weighted mean Huber loss
    bool converged = false;
    bool offset_at_boundary = false;  // offset ended clamped at the window edge
    int iterations = 0;
};

struct CalibrateConfig {
    double delta_px = 5.0;        // Huber quadratic/linear transition
    double lr = 0.01;             // Adam step size (decays geometrically)
    int max_iters = 2000;
    double offset_window_s = 0.5;
    double confidence_threshold = 0.5;  // initialization correspondence gate
};

/// Pinhole projection u = fx X/Z + cx, v = fy Y/Z + cy after extrinsics.
/// Throws NumericError for non-positive depth.
Eigen::Vector2d project(const CameraModel& camera, const Eigen::Vector3d& point);

/// All six joints linearly interpolated at time t (seconds on the mocap
/// clock). Throws DataError when t is outside the mocap range.
Eigen::Matrix<double, kSyncJoints, 3> interpolate_mocap(const Eigen::MatrixXd& mocap,
                                                        double mocap_hz, double t);

/// Huber loss of a scalar residual: r^2/2 inside delta, linear outside.
double huber(double residual, double delta);

/// Direct-linear-transform estimate of the camera from high-confidence
/// correspondences at the problem's initial offset; skew fixed at zero,
/// principal point free. Throws DataError on degenerate geometry or when
/// there are insufficient correspondences.
CameraModel initialize(const SyncProblem& problem,
                       const CalibrateConfig& config = CalibrateConfig());

/// Confidence-weighted mean Huber reprojection loss at the given camera and
/// offset; optionally also its exact gradient in the 11-vector layout
/// [fx, fy, cx, cy, w_rot (3, local tangent), t (3), offset].
double sync_objective(const SyncProblem& problem, const CameraModel& camera, double offset,
                      double delta_px, Eigen::VectorXd* gradient = nullptr);

/// Joint Adam minimization over camera and offset, rotation via a local
/// 3-parameter update re-orthonormalized each step. Deterministic.
SyncResult calibrate(const SyncProblem& problem,
                     const CalibrateConfig& config = CalibrateConfig());

struct DetectionStats {
    double frac_missing = 0.0;
    bool bbox_swapped = false;
};

struct ScreenDecision {
    bool accept = false;
    std::vector<std::string> reasons;  // every violated rule, empty on accept
};

/// accept iff mean_huber < 10 px AND |offset| < 0.200 s AND
/// frac_missing <= 0.20 AND not bbox_swapped AND sync_frames > 30 AND
/// events_valid.
ScreenDecision screen_trial(const SyncResult& result, const DetectionStats& detection,
                            int sync_frames, bool events_valid);

/// Key/value report of a SyncResult (tab separated, one pair per line).
void write_sync_report(std::ostream& os, const SyncResult& result);

}  // namespace gaitkit
