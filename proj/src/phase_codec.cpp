#include "gaitkit/phase_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gaitkit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Index of the consecutive pair (k, k+1) bracketing t, clamped to the
// nearest pair outside the list range.
std::size_t bracketing_pair(const std::vector<double>& times, double t) {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - times.begin());
    if (idx == 0) {
        return 0;
    }
    return std::min(idx - 1, times.size() - 2);
}

}  // namespace

double event_phase(const std::vector<double>& event_times,
                   const std::vector<double>& same_side_contacts, double t) {
    if (event_times.empty()) {
        throw DataError("event_phase: empty event list");
    }
    if (event_times.size() >= 2) {
        const std::size_t k = bracketing_pair(event_times, t);
        const double t0 = event_times[k];
        const double t1 = event_times[k + 1];
        if (!(t1 - t0 > 0.0)) {
            throw DataError("event_phase: zero/negative period between events");
        }
        return kTwoPi * (static_cast<double>(k) + (t - t0) / (t1 - t0));
    }
    // Single event: period from the adjacent same-side contact pair.
    if (same_side_contacts.size() < 2) {
        throw DataError("event_phase: single event and no same-side contact period");
    }
    const std::size_t k = bracketing_pair(same_side_contacts, event_times[0]);
    const double period = same_side_contacts[k + 1] - same_side_contacts[k];
    if (!(period > 0.0)) {
        throw DataError("event_phase: zero/negative fallback period");
    }
    return kTwoPi * (t - event_times[0]) / period;
}

double loss_weight(double t, double t0, double t1) {
    if (t0 > t1) {
        throw DataError("loss_weight: t0 > t1");
    }
    const double d = std::max({0.0, t0 - t, t - t1});
    return std::max(0.0, 1.0 - d);
}

EncodedPhases encode(const EventAnnotations& events, const std::vector<double>& times) {
    const auto T = static_cast<Eigen::Index>(times.size());
    EncodedPhases out;
    out.targets.phases.resize(T, kEventTypes);
    out.targets.weights.resize(T, kEventTypes);
    out.frames.resize(times.size());

    for (int e = 0; e < kEventTypes; ++e) {
        const std::vector<double>& list = events.list(e);
        // Fallback period source: same-side contacts (lfo -> lfc, rfo -> rfc;
        // contact streams fall back to themselves, which requires >= 2 entries).
        const std::vector<double>& contacts = events.list(e % 2);
        if (list.empty()) {
            throw DataError("encode: empty event list for " +
                            std::string(event_type_names()[e]));
        }
        const double w0 = list.front();
        const double w1 = list.back();
        for (Eigen::Index i = 0; i < T; ++i) {
            const double phi = event_phase(list, contacts, times[i]);
            out.targets.phases(i, e) = phi;
            out.targets.weights(i, e) = loss_weight(times[i], w0, w1);
            out.frames[i].q[2 * e] = std::cos(phi);
            out.frames[i].q[2 * e + 1] = std::sin(phi);
        }
    }
    return out;
}

std::array<double, kEventTypes> decode(const PhaseFrame& frame) {
    std::array<double, kEventTypes> phases{};
    for (int e = 0; e < kEventTypes; ++e) {
        const double c = frame.q[2 * e];
        const double s = frame.q[2 * e + 1];
        if (c == 0.0 && s == 0.0) {
            throw NumericError("decode: degenerate (0, 0) quadrature pair for " +
                               std::string(event_type_names()[e]));
        }
        double phi = std::atan2(s, c);
        if (phi <= -std::numbers::pi) {
            phi += kTwoPi;  // fix range to (-pi, pi]
        }
        phases[e] = phi;
    }
    return phases;
}

}  // namespace gaitkit
