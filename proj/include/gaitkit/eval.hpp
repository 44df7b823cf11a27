#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gaitkit/core.hpp"
#include "gaitkit/gait_params.hpp"
#include "gaitkit/smoother.hpp"

namespace gaitkit {

struct EventMatch {
    int event_type = 0;  // index into event_type_names()
    double detected_s = 0;
    double truth_s = 0;
    double error_s = 0;  // detected - truth
};

struct MatchResult {
    std::vector<EventMatch> matches;  // one per detected event with same-type truth
    std::array<int, kEventTypes> unmatched_truth{};  // no detection within 1 s
    int truth_total = 0;
    int detected_total = 0;
    int unmatched_total() const;
};

// Pairs every detected event with the nearest same-type ground-truth event
// (several detections may share one truth event). Truth events with no
// same-type detection within 1 s are counted unmatched.
MatchResult match_events(const EventAnnotations& detected, const EventAnnotations& truth);
MatchResult match_events(const DetectedEvents& detected, const EventAnnotations& truth);

// Linear-interpolated percentile, p in [0, 1]. Throws DataError when empty.
double percentile(std::vector<double> values, double p);

struct ErrorStats {
    std::optional<double> median_abs_s;  // absent when n == 0
    std::optional<double> p90_abs_s;
    int n = 0;
    int n_over_1s = 0;  // |error| > 1 s
};

ErrorStats error_stats(const std::vector<double>& errors_s);

struct Agreement {
    std::optional<double> r;  // absent when either input has zero variance
    double rmse = 0;
    int n = 0;
};

// Pearson r and RMSE between paired samples. Requires equal lengths >= 3.
Agreement agreement(const std::vector<double>& estimated, const std::vector<double>& truth);

// Everything eval needs from one trial: its event lists plus the
// (estimated, truth) parameter pair per side, if both sides produced a
// complete cycle.
struct TrialEvalInput {
    std::string trial_id;
    EventAnnotations detected;
    EventAnnotations truth_events;
    std::vector<std::pair<GaitCycleParams, GaitCycleParams>> cycle_pairs;
};

// First complete cycle of each side, paired across the two parameter lists.
// Sides missing from either list are dropped.
std::vector<std::pair<GaitCycleParams, GaitCycleParams>> pair_first_cycles(
    const std::vector<GaitCycleParams>& estimated, const std::vector<GaitCycleParams>& truth);

struct ParameterAgreement {
    std::string name;
    Agreement stats;
};

struct AgreementReport {
    ErrorStats event_errors;  // pooled signed matched-event errors, all trials
    std::array<int, kEventTypes> unmatched_truth{};
    std::vector<ParameterAgreement> parameters;  // only parameters with n >= 3
    std::vector<std::string> excluded_trials;    // unmatched truth or >1 s error
    int trials_evaluated = 0;                    // trials contributing parameters
    std::vector<double> pooled_errors_s;         // signed, histogram source
};

// Pools event errors across all trials; computes per-parameter agreement over
// the cycle pairs of trials that pass the exclusion rule (no unmatched truth
// events, no |error| > 1 s).
AgreementReport evaluate(const std::vector<TrialEvalInput>& trials);

// Key/value report lines.
void write_report(std::ostream& os, const AgreementReport& report);

// Signed-error histogram: bin_lo_s, bin_hi_s, count rows at a fixed bin width.
void write_error_histogram(std::ostream& os, const std::vector<double>& errors_s,
                           double bin_s = 0.010);

// Long-format scatter pairs: trial_id, side, parameter, estimated, truth.
void write_comparison_tsv(std::ostream& os, const std::vector<TrialEvalInput>& trials);

}  // namespace gaitkit
