#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gaitkit/core.hpp"
#include "gaitkit/smoother.hpp"

namespace gaitkit {

enum class Side { Left, Right };

const char* side_name(Side side);

// One gait cycle between two successive same-side foot contacts, with the
// canonical interior events. For a left cycle the ordering is
// LFC(start) < RFO < RFC < LFO < LFC(end); mirrored for a right cycle.
struct GaitCycle {
    Side side = Side::Left;
    double start = 0;             // own-side contact opening the cycle (s)
    double end = 0;               // next own-side contact (s)
    double opposite_off = 0;      // opposite foot leaves the ground
    double opposite_contact = 0;  // opposite foot lands
    double own_off = 0;           // own foot leaves the ground
};

// A contact pair that could not be promoted to a cycle, and why.
struct SkippedSpan {
    Side side = Side::Left;
    double start = 0;
    double end = 0;
    std::string reason;
};

struct ParsedCycles {
    std::vector<GaitCycle> cycles;   // ordered by start time
    std::vector<SkippedSpan> skipped;
};

// The six per-cycle parameters.
struct GaitCycleParams {
    Side side = Side::Left;
    double start = 0;
    double end = 0;
    double cadence_spm = 0;       // two steps per cycle
    double step_time_s = 0;       // own contact to opposite contact
    double step_length_m = 0;     // |lead - trail| foot position at opposite contact
    double velocity_mps = 0;      // mean pelvis velocity over the cycle
    double double_stance_s = 0;   // both feet grounded
    double single_support_s = 0;  // only the cycle's own foot grounded
    // Second step-length sample, taken at the cycle-start contact.
    std::optional<double> step_length_start_m;
};

// Promotes every pair of successive same-side contacts holding the full
// canonical interior sequence to a GaitCycle; everything else is skipped
// with a reason code.
ParsedCycles parse_cycles(const EventAnnotations& events);
ParsedCycles parse_cycles(const DetectedEvents& detected);

// Computes the six parameters for one cycle from the kinematic channels,
// sampling channels at event times by linear interpolation.
// Throws DataError if the cycle lies outside the kinematics time range or a
// needed channel value is non-finite.
GaitCycleParams extract_parameters(const GaitCycle& cycle,
                                   const std::vector<KinematicFrame>& kin, double fps);

// Tab-separated export, one row per cycle: trial_id, side, start_s, end_s,
// cadence_spm, step_time_s, step_length_m, velocity_mps, double_stance_s,
// single_support_s, source.
void write_params_tsv(std::ostream& os, const std::string& trial_id,
                      const std::vector<GaitCycleParams>& rows, const std::string& source,
                      bool header = true);

}  // namespace gaitkit
