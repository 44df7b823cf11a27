#include "gaitkit/synth.hpp"

#include "gaitkit/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gaitkit {

namespace {

constexpr double kPi = std::numbers::pi;

// Segment lengths as fractions of body height.
constexpr double kThighFrac = 0.245;
constexpr double kShankFrac = 0.246;
constexpr double kAnkleHeightFrac = 0.039;
constexpr double kToeHeightFrac = 0.020;
constexpr double kFootLengthFrac = 0.080;  // ankle to toe, forward
constexpr double kTorsoFrac = 0.288;       // mid hip to sternum
constexpr double kHipWidthFrac = 0.160;
constexpr double kSwingLiftFrac = 0.040;

// Reach margin left between the straightest leg pose and full extension.
constexpr double kReachMargin = 0.98;

struct Anthropometry {
    double thigh, shank, ankle_h, toe_h, foot_len, torso, hip_w, lift, hip_h;
};

struct Fractions {
    double rfo, rfc, lfo;
};

// Asymmetry rescales the commanded fractions so that the ratio of the two
// step times (LFC->RFC over RFC->LFC) equals the commanded value, keeping the
// foot-off fractions proportional within their step.
Fractions resolved_fractions(const GaitSpec& s) {
    if (s.asymmetry == 1.0) {
        return {s.rfo_fraction, s.rfc_fraction, s.lfo_fraction};
    }
    const double rfc = s.asymmetry / (1.0 + s.asymmetry);
    const double rfo = s.rfo_fraction * (rfc / s.rfc_fraction);
    const double lfo =
        rfc + (s.lfo_fraction - s.rfc_fraction) * (1.0 - rfc) / (1.0 - s.rfc_fraction);
    return {rfo, rfc, lfo};
}

// Largest forward hip-to-ankle gap over the cycle, as a length in meters.
// Stance gaps peak at foot off; the swing trajectory dips slightly past them
// (0.08 covers the dip), and the ankle trails the toe by the foot length.
double max_forward_gap(const GaitSpec& s, const Fractions& f, const Anthropometry& a) {
    const double stance_frac = std::max({2.0 * f.lfo - 0.5,
                                         2.0 * (1.0 + f.rfo - f.rfc) - 0.5, 0.5});
    return s.step_length_m * (stance_frac + 0.08) + a.foot_len;
}

Anthropometry body_for(const GaitSpec& s, const Fractions& f) {
    Anthropometry a;
    const double h = s.height_m;
    a.thigh = kThighFrac * h;
    a.shank = kShankFrac * h;
    a.ankle_h = kAnkleHeightFrac * h;
    a.toe_h = kToeHeightFrac * h;
    a.foot_len = kFootLengthFrac * h;
    a.torso = kTorsoFrac * h;
    a.hip_w = kHipWidthFrac * h;
    a.lift = kSwingLiftFrac * h;

    // Crouch the hip exactly enough that two-link leg IK stays feasible at
    // the widest stance gap. Realism is a non-goal; exactness is.
    const double reach = kReachMargin * (a.thigh + a.shank);
    const double gap = max_forward_gap(s, f, a);
    if (gap >= 0.96 * (a.thigh + a.shank)) {
        throw DataError("generate: step length exceeds leg reach for height");
    }
    a.hip_h = a.ankle_h + std::sqrt(reach * reach - gap * gap);
    return a;
}

// Forward toe position and its world state for one foot at time t.
// landing_base is the toe position of the landing at local cycle index 0;
// local time is t shifted so landings happen at integer multiples of cycle.
struct FootState {
    double toe_z;
    double lift_y;  // added to both ankle and toe heights
};

FootState foot_at(double local_t, double cycle, double stance_frac, double landing_step,
                  double base_z, double lift_amp, double step_length) {
    const double k = std::floor(local_t / cycle);
    const double p = local_t / cycle - k;
    const double landing_z = base_z + k * landing_step;
    if (p < stance_frac) {
        return {landing_z, 0.0};
    }
    const double u = (p - stance_frac) / (1.0 - stance_frac);
    const double advance = 2.0 * step_length * 0.5 * (1.0 - std::cos(kPi * u));
    const double lift = lift_amp * std::sin(kPi * u) * std::sin(kPi * u);
    return {landing_z + advance, lift};
}

// Knee position from hip and ankle in the sagittal (y, z) plane of one leg.
// The knee apex points forward of the hip-ankle line.
Vec3 solve_knee(const Vec3& hip, const Vec3& ankle, double thigh, double shank) {
    const double vy = ankle.y() - hip.y();
    const double vz = ankle.z() - hip.z();
    const double d = std::hypot(vy, vz);
    if (d > thigh + shank) {
        throw DataError("generate: leg reach exceeded during trajectory synthesis");
    }
    const double along = (thigh * thigh - shank * shank + d * d) / (2.0 * d);
    const double perp2 = thigh * thigh - along * along;
    const double perp = perp2 > 0.0 ? std::sqrt(perp2) : 0.0;
    // Unit vectors in the (y, z) plane: along hip->ankle and forward normal.
    const double uy = vy / d, uz = vz / d;
    const double ny = uz, nz = -uy;
    return Vec3(hip.x(), hip.y() + along * uy + perp * ny, hip.z() + along * uz + perp * nz);
}

double hip_flexion_deg(const Vec3& hip, const Vec3& knee) {
    const Vec3 thigh = knee - hip;
    return std::atan2(thigh.z(), -thigh.y()) * 180.0 / kPi;
}

double knee_flexion_deg(const Vec3& hip, const Vec3& knee, const Vec3& ankle) {
    const Vec3 t = (knee - hip).normalized();
    const Vec3 s = (ankle - knee).normalized();
    const double c = std::clamp(t.dot(s), -1.0, 1.0);
    return std::acos(c) * 180.0 / kPi;
}

std::vector<double> event_times(double first, double cycle, double limit) {
    std::vector<double> out;
    for (int k = 0;; ++k) {
        const double t = first + static_cast<double>(k) * cycle;
        if (t > limit) {
            break;
        }
        out.push_back(t);
    }
    return out;
}

}  // namespace

void validate_spec(const GaitSpec& spec) {
    if (!(spec.cadence_spm >= 20.0 && spec.cadence_spm <= 240.0)) {
        throw DataError("spec.cadence_spm: must be in [20, 240]");
    }
    if (!(spec.step_length_m > 0.0)) {
        throw DataError("spec.step_length_m: must be positive");
    }
    if (!(spec.height_m > 0.5 && spec.height_m < 2.5)) {
        throw DataError("spec.height_m: must be in (0.5, 2.5)");
    }
    if (!(spec.duration_s > 0.0) || !(spec.fps > 0.0)) {
        throw DataError("spec.duration_s/fps: must be positive");
    }
    if (!(spec.asymmetry > 0.0)) {
        throw DataError("spec.asymmetry: must be positive");
    }
    if (!(spec.noise_sigma_m >= 0.0)) {
        throw DataError("spec.noise_sigma_m: must be non-negative");
    }
    const Fractions f = resolved_fractions(spec);
    if (!(0.0 < f.rfo && f.rfo < f.rfc && f.rfc < f.lfo && f.lfo < 1.0)) {
        throw DataError("spec fractions: need 0 < rfo < rfc < lfo < 1");
    }
    const Anthropometry a = body_for(spec, f);  // throws when reach is exceeded
    (void)a;
}

Trial generate(const GaitSpec& spec) {
    validate_spec(spec);
    const Fractions f = resolved_fractions(spec);
    const Anthropometry body = body_for(spec, f);

    const double cycle = 120.0 / spec.cadence_spm;  // two steps per cycle
    const double s = spec.step_length_m;
    const double v = s * spec.cadence_spm / 60.0;   // commanded pelvis speed

    const auto frame_count = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fps));
    if (frame_count < 2) {
        throw DataError("spec.duration_s: too short for two frames");
    }
    const double dt = 1.0 / spec.fps;

    Trial trial;
    trial.id = spec.id;
    trial.subject_height = spec.height_m;
    trial.fps = spec.fps;

    // The pattern starts a quarter cycle before the first left contact so no
    // event sits on the recording boundary, where a phase crossing becomes
    // one-sided. Left toe lands at (k + 1/4)*cycle at 2s*k + s; the right toe
    // lands at cycle phase rfc after that, one step length ahead.
    const double start_lag = 0.25 * cycle;
    const double left_base = s;
    const double right_base = 2.0 * s;
    const double right_shift = start_lag + f.rfc * cycle;
    const double left_stance_frac = f.lfo;
    const double right_stance_frac = 1.0 + f.rfo - f.rfc;

    std::vector<double> toe_z_l(frame_count), toe_z_r(frame_count);
    std::vector<Skeleton> clean(frame_count);
    std::vector<KinematicFrame> kin(frame_count);

    for (std::size_t i = 0; i < frame_count; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double pelvis_z = v * t;

        const FootState left = foot_at(t - start_lag, cycle, left_stance_frac, 2.0 * s,
                                       left_base, body.lift, s);
        const FootState right = foot_at(t - right_shift, cycle, right_stance_frac, 2.0 * s,
                                        right_base, body.lift, s);
        toe_z_l[i] = left.toe_z;
        toe_z_r[i] = right.toe_z;

        Skeleton& sk = clean[i];
        sk[Joint::MidHip] = Vec3(0.0, body.hip_h, pelvis_z);
        sk[Joint::Sternum] = Vec3(0.0, body.hip_h + body.torso, pelvis_z);
        sk[Joint::HipL] = Vec3(-0.5 * body.hip_w, body.hip_h, pelvis_z);
        sk[Joint::HipR] = Vec3(0.5 * body.hip_w, body.hip_h, pelvis_z);
        sk[Joint::ToeL] = Vec3(-0.5 * body.hip_w, body.toe_h + left.lift_y, left.toe_z);
        sk[Joint::ToeR] = Vec3(0.5 * body.hip_w, body.toe_h + right.lift_y, right.toe_z);
        sk[Joint::AnkleL] =
            Vec3(-0.5 * body.hip_w, body.ankle_h + left.lift_y, left.toe_z - body.foot_len);
        sk[Joint::AnkleR] =
            Vec3(0.5 * body.hip_w, body.ankle_h + right.lift_y, right.toe_z - body.foot_len);
        sk[Joint::KneeL] = solve_knee(sk[Joint::HipL], sk[Joint::AnkleL], body.thigh, body.shank);
        sk[Joint::KneeR] = solve_knee(sk[Joint::HipR], sk[Joint::AnkleR], body.thigh, body.shank);

        KinematicFrame& kf = kin[i];
        kf.hip_flex_l = hip_flexion_deg(sk[Joint::HipL], sk[Joint::KneeL]);
        kf.hip_flex_r = hip_flexion_deg(sk[Joint::HipR], sk[Joint::KneeR]);
        kf.knee_flex_l = knee_flexion_deg(sk[Joint::HipL], sk[Joint::KneeL], sk[Joint::AnkleL]);
        kf.knee_flex_r = knee_flexion_deg(sk[Joint::HipR], sk[Joint::KneeR], sk[Joint::AnkleR]);
        kf.foot_pos_l = left.toe_z - pelvis_z;
        kf.foot_pos_r = right.toe_z - pelvis_z;
        kf.pelvis_vel = v;
    }

    // Foot velocities as forward differences of toe position; this makes the
    // physical-consistency error vanish identically on the ground truth.
    for (std::size_t i = 0; i + 1 < frame_count; ++i) {
        kin[i].foot_vel_l = (toe_z_l[i + 1] - toe_z_l[i]) / dt;
        kin[i].foot_vel_r = (toe_z_r[i + 1] - toe_z_r[i]) / dt;
    }
    kin[frame_count - 1].foot_vel_l = kin[frame_count - 2].foot_vel_l;
    kin[frame_count - 1].foot_vel_r = kin[frame_count - 2].foot_vel_r;

    const double limit = trial.frame_time(frame_count - 1);
    EventAnnotations events;
    events.lfc = event_times(start_lag, cycle, limit);
    events.rfc = event_times(start_lag + f.rfc * cycle, cycle, limit);
    events.lfo = event_times(start_lag + f.lfo * cycle, cycle, limit);
    events.rfo = event_times(start_lag + f.rfo * cycle, cycle, limit);

    trial.frames = clean;
    if (spec.noise_sigma_m > 0.0) {
        Rng rng(spec.seed);
        for (Skeleton& sk : trial.frames) {
            for (int j = 0; j < kJointCount; ++j) {
                if (j == static_cast<int>(Joint::MidHip)) {
                    continue;
                }
                for (int c = 0; c < 3; ++c) {
                    sk.joints[j][c] += rng.normal(0.0, spec.noise_sigma_m);
                }
            }
            sk[Joint::MidHip] = 0.5 * (sk[Joint::HipL] + sk[Joint::HipR]);
        }
    }
    trial.gt_kinematics = std::move(kin);
    trial.gt_events = std::move(events);
    validate_trial(trial);
    return trial;
}

std::vector<GaitSpec> draw_specs(int n, const SpecRanges& ranges, std::uint64_t seed) {
    auto check_range = [](std::pair<double, double> r, const char* name) {
        if (!(r.first <= r.second)) {
            throw DataError(std::string("spec range ") + name + ": empty (lo > hi)");
        }
    };
    check_range(ranges.cadence_spm, "cadence_spm");
    check_range(ranges.step_length_m, "step_length_m");
    check_range(ranges.height_m, "height_m");
    check_range(ranges.duration_s, "duration_s");
    check_range(ranges.asymmetry, "asymmetry");
    if (n <= 0) {
        throw DataError("draw_specs: n must be positive");
    }

    // The widest step on the shortest body must stay feasible, otherwise some
    // draws would fail; reject the range combination up front.
    {
        GaitSpec worst;
        worst.step_length_m = ranges.step_length_m.second;
        worst.height_m = ranges.height_m.first;
        worst.asymmetry = ranges.asymmetry.second;
        validate_spec(worst);
    }

    Rng rng(seed);
    std::vector<GaitSpec> specs;
    specs.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        GaitSpec spec;
        spec.cadence_spm = rng.uniform(ranges.cadence_spm.first, ranges.cadence_spm.second);
        spec.step_length_m =
            rng.uniform(ranges.step_length_m.first, ranges.step_length_m.second);
        spec.height_m = rng.uniform(ranges.height_m.first, ranges.height_m.second);
        spec.duration_s = rng.uniform(ranges.duration_s.first, ranges.duration_s.second);
        spec.asymmetry = rng.uniform(ranges.asymmetry.first, ranges.asymmetry.second);
        spec.noise_sigma_m = ranges.noise_sigma_m;
        spec.fps = ranges.fps;
        spec.seed = rng.next_u64();
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "-%04d", k);
        spec.id = ranges.id_prefix + suffix;
        specs.push_back(spec);
    }
    return specs;
}

std::vector<Trial> make_dataset(int n, const SpecRanges& ranges, std::uint64_t seed) {
    std::vector<Trial> out;
    out.reserve(static_cast<std::size_t>(n));
    for (const GaitSpec& spec : draw_specs(n, ranges, seed)) {
        out.push_back(generate(spec));
    }
    return out;
}

}  // namespace gaitkit
