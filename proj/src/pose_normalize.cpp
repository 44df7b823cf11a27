#include "gaitkit/pose_normalize.hpp"

#include <cmath>

namespace gaitkit {

namespace {

constexpr double kDegenerateNorm = 1e-9;  // meters

Eigen::Matrix3d rotation_about_y(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Eigen::Matrix3d r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

Eigen::Matrix3d rotation_about_z(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Eigen::Matrix3d r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

CanonicalPose apply(const Skeleton& frame, const Eigen::Matrix3d& rotation) {
    CanonicalPose pose;
    pose.rotation = rotation;
    const Vec3 pelvis = frame[Joint::MidHip];
    for (int j = 0; j < kJointCount; ++j) {
        pose.joints[j] = rotation * (frame.joints[j] - pelvis);
    }
    return pose;
}

}  // namespace

Eigen::Matrix3d canonical_rotation(const Skeleton& frame) {
    const Vec3 hips = frame[Joint::HipR] - frame[Joint::HipL];
    if (std::hypot(hips.x(), hips.z()) < kDegenerateNorm) {
        throw DataError("canonical_rotation: degenerate inter-hip vector");
    }
    // Yaw about +Y so the hip vector loses its forward component; the solve
    // leaves its lateral component positive (right hip toward +X).
    const double yaw = std::atan2(hips.z(), hips.x());
    const Eigen::Matrix3d r_yaw = rotation_about_y(yaw);
    // r_yaw maps x -> (x cos + z sin, y, -x sin + z cos); with yaw =
    // atan2(z, x) the hip vector's new forward component is exactly zero.

    const Vec3 torso = r_yaw * (frame[Joint::Sternum] - frame[Joint::MidHip]);
    if (std::hypot(torso.x(), torso.y()) < kDegenerateNorm) {
        throw DataError("canonical_rotation: degenerate torso vector");
    }
    // Roll about +Z so the torso loses its lateral component. The solve makes
    // the new vertical component hypot(x, y) > 0, so the torso ends up on +Y.
    const double roll = std::atan2(torso.x(), torso.y());
    return rotation_about_z(roll) * r_yaw;
}

std::vector<CanonicalPose> normalize_sequence(const Trial& trial, NormalizeMode mode) {
    std::vector<CanonicalPose> out;
    out.reserve(trial.frames.size());
    if (trial.frames.empty()) {
        return out;
    }
    if (mode == NormalizeMode::FirstFrame) {
        const Eigen::Matrix3d rotation = canonical_rotation(trial.frames.front());
        for (const Skeleton& frame : trial.frames) {
            out.push_back(apply(frame, rotation));
        }
    } else {
        for (const Skeleton& frame : trial.frames) {
            out.push_back(apply(frame, canonical_rotation(frame)));
        }
    }
    return out;
}

}  // namespace gaitkit
