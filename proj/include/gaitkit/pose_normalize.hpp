#pragma once

#include "gaitkit/core.hpp"

#include <Eigen/Core>

#include <vector>

// Camera-angle-invariant canonicalization of joint sequences.
//
// Each frame is pelvis-centered (mid_hip at the origin) and rotated so that
// the inter-hip vector lies in the frontal plane and the mid-hip-to-sternum
// vector is vertical within that plane. After normalization the right hip
// points toward +X and the torso toward +Y.

namespace gaitkit {

struct CanonicalPose {
    std::array<Vec3, kJointCount> joints{};  // pelvis-centered, rotated
    Eigen::Matrix3d rotation;                // the rotation that was applied

    Vec3& operator[](Joint j) { return joints[static_cast<int>(j)]; }
    const Vec3& operator[](Joint j) const { return joints[static_cast<int>(j)]; }
};

enum class NormalizeMode {
    PerFrame,    // recompute the rotation for every frame (default)
    FirstFrame,  // reuse frame 0's rotation for the whole sequence
};

/// Rotation built from a yaw about +Y that zeroes the forward component of
/// the inter-hip vector, then a roll about +Z that zeroes the lateral
/// component of the torso vector. Preserves handedness.
Eigen::Matrix3d canonical_rotation(const Skeleton& frame);

std::vector<CanonicalPose> normalize_sequence(const Trial& trial,
                                              NormalizeMode mode = NormalizeMode::PerFrame);

}  // namespace gaitkit
