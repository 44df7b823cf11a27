#include "gaitkit/core.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace gaitkit {

using nlohmann::json;

const std::array<std::string_view, kJointCount>& joint_names() {
    static const std::array<std::string_view, kJointCount> names = {
        "mid_hip", "sternum", "hip_l", "hip_r", "knee_l",
        "knee_r",  "ankle_l", "ankle_r", "toe_l", "toe_r",
    };
    return names;
}

const std::array<std::string_view, KinematicFrame::kChannels>& kinematic_channel_names() {
    static const std::array<std::string_view, KinematicFrame::kChannels> names = {
        "hip_flex_l", "hip_flex_r", "knee_flex_l", "knee_flex_r", "foot_pos_l",
        "foot_pos_r", "pelvis_vel", "foot_vel_l",  "foot_vel_r",
    };
    return names;
}

const std::array<std::string_view, kEventTypes>& event_type_names() {
    static const std::array<std::string_view, kEventTypes> names = {"lfc", "rfc", "lfo", "rfo"};
    return names;
}

double KinematicFrame::channel(int i) const {
    switch (i) {
        case 0: return hip_flex_l;
        case 1: return hip_flex_r;
        case 2: return knee_flex_l;
        case 3: return knee_flex_r;
        case 4: return foot_pos_l;
        case 5: return foot_pos_r;
        case 6: return pelvis_vel;
        case 7: return foot_vel_l;
        case 8: return foot_vel_r;
        default: throw std::out_of_range("kinematic channel index");
    }
}

void KinematicFrame::set_channel(int i, double v) {
    switch (i) {
        case 0: hip_flex_l = v; break;
        case 1: hip_flex_r = v; break;
        case 2: knee_flex_l = v; break;
        case 3: knee_flex_r = v; break;
        case 4: foot_pos_l = v; break;
        case 5: foot_pos_r = v; break;
        case 6: pelvis_vel = v; break;
        case 7: foot_vel_l = v; break;
        case 8: foot_vel_r = v; break;
        default: throw std::out_of_range("kinematic channel index");
    }
}

const std::vector<double>& EventAnnotations::list(int event_index) const {
    switch (event_index) {
        case 0: return lfc;
        case 1: return rfc;
        case 2: return lfo;
        case 3: return rfo;
        default: throw std::out_of_range("event type index");
    }
}

std::vector<double>& EventAnnotations::list(int event_index) {
    switch (event_index) {
        case 0: return lfc;
        case 1: return rfc;
        case 2: return lfo;
        case 3: return rfo;
        default: throw std::out_of_range("event type index");
    }
}

namespace {

constexpr double kMidHipTolerance = 1e-6;   // meters
constexpr double kMinEventSpacing = 0.2;    // seconds, same-type events

void validate_event_list(const std::vector<double>& times, std::string_view name,
                         double duration) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double t : times) {
        if (!std::isfinite(t)) {
            throw DataError("events." + std::string(name) + ": non-finite time");
        }
        if (t < 0.0 || t > duration) {
            throw DataError("events." + std::string(name) +
                            ": time outside [0, trial duration]");
        }
        if (t <= prev) {
            throw DataError("events." + std::string(name) + ": not strictly increasing");
        }
        if (t - prev <= kMinEventSpacing) {
            throw DataError("events." + std::string(name) +
                            ": same-type events closer than 0.2 s");
        }
        prev = t;
    }
}

}  // namespace

void validate_trial(const Trial& trial) {
    if (!(trial.fps > 0.0) || !std::isfinite(trial.fps)) {
        throw DataError("fps: must be finite and > 0");
    }
    if (trial.frames.empty()) {
        throw DataError("frames: must be non-empty");
    }
    if (!(trial.subject_height > 0.5 && trial.subject_height < 2.5)) {
        throw DataError("height_m: must be in (0.5, 2.5)");
    }
    for (std::size_t f = 0; f < trial.frames.size(); ++f) {
        const Skeleton& sk = trial.frames[f];
        for (int j = 0; j < kJointCount; ++j) {
            if (!sk.joints[j].allFinite()) {
                throw DataError("frames[" + std::to_string(f) + "]." +
                                std::string(joint_names()[j]) + ": non-finite coordinate");
            }
        }
        const Vec3 mid = 0.5 * (sk[Joint::HipL] + sk[Joint::HipR]);
        if ((sk[Joint::MidHip] - mid).norm() > kMidHipTolerance) {
            throw DataError("frames[" + std::to_string(f) +
                            "].mid_hip: not the midpoint of hip_l and hip_r");
        }
    }
    if (trial.gt_kinematics) {
        if (trial.gt_kinematics->size() != trial.frames.size()) {
            throw DataError("kinematics: length differs from frames");
        }
        for (std::size_t f = 0; f < trial.gt_kinematics->size(); ++f) {
            for (int c = 0; c < KinematicFrame::kChannels; ++c) {
                if (!std::isfinite((*trial.gt_kinematics)[f].channel(c))) {
                    throw DataError("kinematics[" + std::to_string(f) + "]: non-finite value");
                }
            }
        }
    }
    if (trial.gt_events) {
        for (int e = 0; e < kEventTypes; ++e) {
            validate_event_list(trial.gt_events->list(e), event_type_names()[e],
                                trial.duration());
        }
    }
}

namespace {

json require_field(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        throw DataError(std::string(key) + ": missing field");
    }
    return *it;
}

double number_field(const json& doc, const char* key) {
    json v = require_field(doc, key);
    if (!v.is_number()) {
        throw DataError(std::string(key) + ": expected a number");
    }
    return v.get<double>();
}

std::vector<double> number_array(const json& arr, const std::string& where) {
    if (!arr.is_array()) {
        throw DataError(where + ": expected an array");
    }
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) {
            throw DataError(where + ": expected numeric entries");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

Trial load_trial(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open trial file: " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("trial file parse error in " + path.string() + ": " + e.what());
    }

    Trial trial;
    json id = require_field(doc, "id");
    if (!id.is_string()) {
        throw DataError("id: expected a string");
    }
    trial.id = id.get<std::string>();
    trial.subject_height = number_field(doc, "height_m");
    trial.fps = number_field(doc, "fps");

    json names = require_field(doc, "joint_names");
    if (!names.is_array() || names.size() != kJointCount) {
        throw DataError("joint_names: expected " + std::to_string(kJointCount) + " names");
    }
    for (int j = 0; j < kJointCount; ++j) {
        if (!names[j].is_string() || names[j].get<std::string>() != joint_names()[j]) {
            throw DataError("joint_names[" + std::to_string(j) + "]: expected \"" +
                            std::string(joint_names()[j]) + "\"");
        }
    }

    json frames = require_field(doc, "frames");
    if (!frames.is_array() || frames.empty()) {
        throw DataError("frames: expected a non-empty array");
    }
    trial.frames.reserve(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const json& frame = frames[f];
        if (!frame.is_array() || frame.size() != kJointCount) {
            throw DataError("frames[" + std::to_string(f) + "]: joint count must be " +
                            std::to_string(kJointCount));
        }
        Skeleton sk;
        for (int j = 0; j < kJointCount; ++j) {
            std::vector<double> xyz =
                number_array(frame[j], "frames[" + std::to_string(f) + "][" +
                                           std::to_string(j) + "]");
            if (xyz.size() != 3) {
                throw DataError("frames[" + std::to_string(f) + "][" + std::to_string(j) +
                                "]: expected 3 coordinates");
            }
            sk.joints[j] = Vec3(xyz[0], xyz[1], xyz[2]);
        }
        trial.frames.push_back(sk);
    }

    if (doc.contains("kinematics")) {
        const json& kin = doc["kinematics"];
        if (!kin.is_array()) {
            throw DataError("kinematics: expected an array");
        }
        std::vector<KinematicFrame> gt;
        gt.reserve(kin.size());
        for (std::size_t f = 0; f < kin.size(); ++f) {
            std::vector<double> row =
                number_array(kin[f], "kinematics[" + std::to_string(f) + "]");
            if (row.size() != KinematicFrame::kChannels) {
                throw DataError("kinematics[" + std::to_string(f) + "]: expected " +
                                std::to_string(KinematicFrame::kChannels) + " channels");
            }
            KinematicFrame kf;
            for (int c = 0; c < KinematicFrame::kChannels; ++c) {
                kf.set_channel(c, row[c]);
            }
            gt.push_back(kf);
        }
        trial.gt_kinematics = std::move(gt);
    }

    if (doc.contains("events")) {
        const json& ev = doc["events"];
        if (!ev.is_object()) {
            throw DataError("events: expected an object");
        }
        EventAnnotations ann;
        for (int e = 0; e < kEventTypes; ++e) {
            std::string key(event_type_names()[e]);
            ann.list(e) = number_array(require_field(ev, key.c_str()), "events." + key);
        }
        trial.gt_events = std::move(ann);
    }

    validate_trial(trial);
    return trial;
}

void save_trial(const Trial& trial, const std::filesystem::path& path) {
    validate_trial(trial);

    json doc;
    doc["id"] = trial.id;
    doc["height_m"] = trial.subject_height;
    doc["fps"] = trial.fps;
    json names = json::array();
    for (auto n : joint_names()) {
        names.push_back(std::string(n));
    }
    doc["joint_names"] = names;

    json frames = json::array();
    for (const Skeleton& sk : trial.frames) {
        json frame = json::array();
        for (int j = 0; j < kJointCount; ++j) {
            frame.push_back({sk.joints[j].x(), sk.joints[j].y(), sk.joints[j].z()});
        }
        frames.push_back(std::move(frame));
    }
    doc["frames"] = std::move(frames);

    if (trial.gt_kinematics) {
        json kin = json::array();
        for (const KinematicFrame& kf : *trial.gt_kinematics) {
            json row = json::array();
            for (int c = 0; c < KinematicFrame::kChannels; ++c) {
                row.push_back(kf.channel(c));
            }
            kin.push_back(std::move(row));
        }
        doc["kinematics"] = std::move(kin);
    }

    if (trial.gt_events) {
        json ev;
        for (int e = 0; e < kEventTypes; ++e) {
            ev[std::string(event_type_names()[e])] = trial.gt_events->list(e);
        }
        doc["events"] = std::move(ev);
    }

    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write trial file: " + path.string());
    }
    out << doc.dump(1) << "\n";
    if (!out) {
        throw DataError("write failed: " + path.string());
    }
}

}  // namespace gaitkit
