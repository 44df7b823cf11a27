#include "gaitkit/gait_params.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace gaitkit {

namespace {

// Events of one list strictly inside (lo, hi).
std::vector<double> inside(const std::vector<double>& times, double lo, double hi) {
    std::vector<double> out;
    for (double t : times) {
        if (t > lo && t < hi) {
            out.push_back(t);
        }
    }
    return out;
}

void scan_side(const EventAnnotations& events, Side side, ParsedCycles& result) {
    const bool left = side == Side::Left;
    const std::vector<double>& own_contacts = left ? events.lfc : events.rfc;
    const std::vector<double>& opp_contacts = left ? events.rfc : events.lfc;
    const std::vector<double>& own_offs = left ? events.lfo : events.rfo;
    const std::vector<double>& opp_offs = left ? events.rfo : events.lfo;

    for (std::size_t i = 0; i + 1 < own_contacts.size(); ++i) {
        const double start = own_contacts[i];
        const double end = own_contacts[i + 1];
        auto skip = [&](const char* reason) {
            result.skipped.push_back({side, start, end, reason});
        };

        const std::vector<double> oc = inside(opp_contacts, start, end);
        const std::vector<double> oo = inside(opp_offs, start, end);
        const std::vector<double> so = inside(own_offs, start, end);
        if (oc.empty()) {
            skip("missing opposite contact");
        } else if (oo.empty()) {
            skip("missing opposite foot off");
        } else if (so.empty()) {
            skip("missing own foot off");
        } else if (oc.size() > 1 || oo.size() > 1 || so.size() > 1) {
            skip("duplicate interior event");
        } else if (!(oo[0] < oc[0] && oc[0] < so[0])) {
            skip("interior events out of order");
        } else {
            result.cycles.push_back({side, start, end, oo[0], oc[0], so[0]});
        }
    }
}

// Linear interpolation of one channel at time t (seconds).
double channel_at(const std::vector<KinematicFrame>& kin, double fps, int channel, double t) {
    const double u = t * fps;
    auto i = static_cast<std::ptrdiff_t>(std::floor(u));
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(kin.size()) - 2);
    const double frac = u - static_cast<double>(i);
    const double a = kin[static_cast<std::size_t>(i)].channel(channel);
    const double b = kin[static_cast<std::size_t>(i) + 1].channel(channel);
    const double value = a + frac * (b - a);
    if (!std::isfinite(value)) {
        throw DataError("kinematics: non-finite channel value");
    }
    return value;
}

// Time average of one linearly interpolated channel over [t0, t1].
double channel_mean(const std::vector<KinematicFrame>& kin, double fps, int channel, double t0,
                    double t1) {
    const double dt = 1.0 / fps;
    double integral = 0.0;
    const auto last = static_cast<std::ptrdiff_t>(kin.size()) - 1;
    const auto i0 = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor(t0 * fps)),
                                               0, last - 1);
    const auto i1 = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::ceil(t1 * fps)),
                                               1, last);
    for (std::ptrdiff_t i = i0; i < i1; ++i) {
        const double a = std::max(t0, static_cast<double>(i) * dt);
        const double b = std::min(t1, static_cast<double>(i + 1) * dt);
        if (b <= a) {
            continue;
        }
        integral += (b - a) * 0.5 *
                    (channel_at(kin, fps, channel, a) + channel_at(kin, fps, channel, b));
    }
    return integral / (t1 - t0);
}

constexpr int kFootPosL = 4;
constexpr int kFootPosR = 5;
constexpr int kPelvisVel = 6;

}  // namespace

const char* side_name(Side side) {
    return side == Side::Left ? "left" : "right";
}

ParsedCycles parse_cycles(const EventAnnotations& events) {
    ParsedCycles result;
    scan_side(events, Side::Left, result);
    scan_side(events, Side::Right, result);
    auto by_start = [](const auto& a, const auto& b) { return a.start < b.start; };
    std::sort(result.cycles.begin(), result.cycles.end(), by_start);
    std::sort(result.skipped.begin(), result.skipped.end(), by_start);
    return result;
}

ParsedCycles parse_cycles(const DetectedEvents& detected) {
    return parse_cycles(detected.events);
}

GaitCycleParams extract_parameters(const GaitCycle& cycle,
                                   const std::vector<KinematicFrame>& kin, double fps) {
    if (kin.size() < 2) {
        throw DataError("kinematics: need at least 2 frames");
    }
    if (!(fps > 0.0) || !std::isfinite(fps)) {
        throw DataError("fps: must be positive and finite");
    }
    const double span = static_cast<double>(kin.size() - 1) / fps;
    if (!(cycle.start >= 0.0 && cycle.end <= span && cycle.start < cycle.end)) {
        throw DataError("cycle: outside kinematics time range");
    }

    GaitCycleParams p;
    p.side = cycle.side;
    p.start = cycle.start;
    p.end = cycle.end;
    const double dur = cycle.end - cycle.start;
    p.cadence_spm = 120.0 / dur;
    p.step_time_s = cycle.opposite_contact - cycle.start;
    p.double_stance_s =
        (cycle.opposite_off - cycle.start) + (cycle.own_off - cycle.opposite_contact);
    p.single_support_s = cycle.opposite_contact - cycle.opposite_off;
    p.velocity_mps = channel_mean(kin, fps, kPelvisVel, cycle.start, cycle.end);

    const int own = cycle.side == Side::Left ? kFootPosL : kFootPosR;
    const int opp = cycle.side == Side::Left ? kFootPosR : kFootPosL;
    p.step_length_m = std::abs(channel_at(kin, fps, opp, cycle.opposite_contact) -
                               channel_at(kin, fps, own, cycle.opposite_contact));
    p.step_length_start_m = std::abs(channel_at(kin, fps, own, cycle.start) -
                                     channel_at(kin, fps, opp, cycle.start));
    return p;
}

void write_params_tsv(std::ostream& os, const std::string& trial_id,
                      const std::vector<GaitCycleParams>& rows, const std::string& source,
                      bool header) {
    if (header) {
        os << "trial_id\tside\tstart_s\tend_s\tcadence_spm\tstep_time_s\tstep_length_m\t"
              "velocity_mps\tdouble_stance_s\tsingle_support_s\tsource\n";
    }
    char buf[256];
    for (const GaitCycleParams& p : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f",
                      p.start, p.end, p.cadence_spm, p.step_time_s, p.step_length_m,
                      p.velocity_mps, p.double_stance_s, p.single_support_s);
        os << trial_id << '\t' << side_name(p.side) << '\t' << buf << '\t' << source << '\n';
    }
}

}  // namespace gaitkit
