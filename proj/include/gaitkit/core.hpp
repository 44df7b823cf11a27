#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Canonical domain types shared by every other module.
//
// Conventions, fixed once here:
//   * world frame is right-handed, +Y up, +Z forward (nominal walking direction)
//   * positions in meters, times in seconds, angles in degrees at API boundaries
//   * joint order is the canonical 10-joint list below; nothing else re-derives it

namespace gaitkit {

using Vec3 = Eigen::Vector3d;

/// Data that violates a schema or an invariant. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure (divergence, lost positive-definiteness, non-finite
/// intermediates). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Joint : int {
    MidHip = 0,
    Sternum,
    HipL,
    HipR,
    KneeL,
    KneeR,
    AnkleL,
    AnkleR,
    ToeL,
    ToeR,
};

inline constexpr int kJointCount = 10;

/// Canonical joint names in serialization order.
const std::array<std::string_view, kJointCount>& joint_names();

/// One frame of 3D joint locations, meters, world frame.
struct Skeleton {
    std::array<Vec3, kJointCount> joints{};

    Vec3& operator[](Joint j) { return joints[static_cast<int>(j)]; }
    const Vec3& operator[](Joint j) const { return joints[static_cast<int>(j)]; }
};

/// The 9 interpretable kinematic channels for one frame.
/// Angles in degrees, positions in meters, velocities in m/s.
struct KinematicFrame {
    double hip_flex_l = 0;
    double hip_flex_r = 0;
    double knee_flex_l = 0;
    double knee_flex_r = 0;
    double foot_pos_l = 0;   // forward toe position relative to pelvis
    double foot_pos_r = 0;
    double pelvis_vel = 0;   // forward mid-hip velocity, world frame
    double foot_vel_l = 0;   // forward toe velocity, world frame
    double foot_vel_r = 0;

    static constexpr int kChannels = 9;

    double channel(int i) const;
    void set_channel(int i, double v);
};

/// Channel names in KinematicFrame order.
const std::array<std::string_view, KinematicFrame::kChannels>& kinematic_channel_names();

/// Ground-truth foot event times in seconds, one sorted list per event type.
struct EventAnnotations {
    std::vector<double> lfc;  // left foot contact
    std::vector<double> rfc;  // right foot contact
    std::vector<double> lfo;  // left foot off
    std::vector<double> rfo;  // right foot off

    const std::vector<double>& list(int event_index) const;
    std::vector<double>& list(int event_index);
};

inline constexpr int kEventTypes = 4;

/// Event type names in PhaseFrame order: lfc, rfc, lfo, rfo.
const std::array<std::string_view, kEventTypes>& event_type_names();

/// One walking bout.
struct Trial {
    std::string id;
    double subject_height = 0;  // meters, in (0.5, 2.5)
    double fps = 0;             // frames per second, > 0
    std::vector<Skeleton> frames;
    std::optional<std::vector<KinematicFrame>> gt_kinematics;
    std::optional<EventAnnotations> gt_events;

    double dt() const { return 1.0 / fps; }
    double frame_time(std::size_t i) const { return static_cast<double>(i) / fps; }
    /// Time of the last frame; events must lie within [0, duration()].
    double duration() const { return frames.empty() ? 0.0 : frame_time(frames.size() - 1); }
};

/// Checks every Trial invariant; throws DataError naming the offending field.
void validate_trial(const Trial& trial);

Trial load_trial(const std::filesystem::path& path);
void save_trial(const Trial& trial, const std::filesystem::path& path);

/// Forward (+Z) component of a - b. The one definition of "forward" shared
/// by every module.
inline double forward_component(const Vec3& a, const Vec3& b) {
    return a.z() - b.z();
}

}  // namespace gaitkit
