#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gaitkit/eval.hpp"

using namespace gaitkit;

namespace {

GaitCycleParams params_row(Side side, double cadence, double step_time, double step_len,
                           double velocity, double ds, double ss) {
    GaitCycleParams p;
    p.side = side;
    p.cadence_spm = cadence;
    p.step_time_s = step_time;
    p.step_length_m = step_len;
    p.velocity_mps = velocity;
    p.double_stance_s = ds;
    p.single_support_s = ss;
    return p;
}

TrialEvalInput exact_trial(const std::string& id, double jitter = 0.0) {
    TrialEvalInput in;
    in.trial_id = id;
    in.truth_events.lfc = {0.3, 1.3, 2.3};
    in.truth_events.rfc = {0.8, 1.8, 2.8};
    in.truth_events.lfo = {1.0, 2.0};
    in.truth_events.rfo = {0.45, 1.45, 2.45};
    in.detected = in.truth_events;
    for (int e = 0; e < kEventTypes; ++e) {
        for (double& t : in.detected.list(e)) {
            t += jitter;
        }
    }
    const GaitCycleParams left = params_row(Side::Left, 120.0, 0.5, 0.6, 1.2, 0.12, 0.44);
    const GaitCycleParams right = params_row(Side::Right, 118.0, 0.52, 0.58, 1.18, 0.13, 0.43);
    in.cycle_pairs = {{left, left}, {right, right}};
    return in;
}

}  // namespace

TEST_CASE("each detection pairs with its nearest same-type truth event") {
    EventAnnotations truth;
    truth.lfc = {1.0, 2.0, 3.0};
    EventAnnotations det;
    det.lfc = {1.1, 2.9};

    const MatchResult mr = match_events(det, truth);
    REQUIRE(mr.matches.size() == 2);
    CHECK(mr.matches[0].truth_s == 1.0);
    CHECK(mr.matches[0].error_s == doctest::Approx(0.1));
    CHECK(mr.matches[1].truth_s == 3.0);
    CHECK(mr.matches[1].error_s == doctest::Approx(-0.1));
    CHECK(mr.truth_total == 3);
    CHECK(mr.detected_total == 2);
    // 2.0 has a detection (1.1 or 2.9) within 1 s, so nothing is unmatched.
    CHECK(mr.unmatched_total() == 0);
}

TEST_CASE("halfway ties go to the earlier truth event") {
    EventAnnotations truth;
    truth.rfc = {1.0, 2.0};
    EventAnnotations det;
    det.rfc = {1.5};
    const MatchResult mr = match_events(det, truth);
    REQUIRE(mr.matches.size() == 1);
    CHECK(mr.matches[0].event_type == 1);
    CHECK(mr.matches[0].truth_s == 1.0);
}

TEST_CASE("truth events far from any detection are unmatched") {
    EventAnnotations truth;
    truth.lfo = {0.5, 5.0};
    truth.rfo = {1.0};
    EventAnnotations det;
    det.lfo = {0.6};
    const MatchResult mr = match_events(det, truth);
    CHECK(mr.unmatched_truth[2] == 1);  // 5.0 is over 1 s from 0.6
    CHECK(mr.unmatched_truth[3] == 1);  // no rfo detections at all
    CHECK(mr.unmatched_total() == 2);
    // Matching is per type: the single lfo detection produced one match.
    REQUIRE(mr.matches.size() == 1);
    CHECK(mr.matches[0].event_type == 2);
}

TEST_CASE("two detections may share one truth event") {
    EventAnnotations truth;
    truth.lfc = {1.0};
    EventAnnotations det;
    det.lfc = {0.9, 1.15};
    const MatchResult mr = match_events(det, truth);
    REQUIRE(mr.matches.size() == 2);
    CHECK(mr.matches[0].truth_s == 1.0);
    CHECK(mr.matches[1].truth_s == 1.0);
    CHECK(mr.unmatched_total() == 0);
}

TEST_CASE("matching is invariant to a common time shift") {
    EventAnnotations truth;
    truth.lfc = {0.4, 1.4, 2.4};
    truth.rfc = {0.9, 1.9};
    EventAnnotations det = truth;
    det.lfc[1] += 0.02;
    det.rfc[0] -= 0.03;
    const MatchResult a = match_events(det, truth);

    EventAnnotations truth_shift = truth;
    EventAnnotations det_shift = det;
    for (int e = 0; e < kEventTypes; ++e) {
        for (double& t : truth_shift.list(e)) {
            t += 100.0;
        }
        for (double& t : det_shift.list(e)) {
            t += 100.0;
        }
    }
    const MatchResult b = match_events(det_shift, truth_shift);
    REQUIRE(a.matches.size() == b.matches.size());
    for (std::size_t i = 0; i < a.matches.size(); ++i) {
        CHECK(a.matches[i].error_s == doctest::Approx(b.matches[i].error_s).epsilon(1e-9));
    }
}

TEST_CASE("percentile interpolates linearly between order statistics") {
    const std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK(percentile(v, 1.0) == 4.0);
    CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
    CHECK(percentile(v, 1.0 / 3.0) == doctest::Approx(2.0));
    CHECK(percentile({7.0}, 0.9) == 7.0);
    CHECK_THROWS_AS(percentile({}, 0.5), DataError);
    CHECK_THROWS_AS(percentile(v, 1.5), DataError);
}

TEST_CASE("error stats summarize absolute errors") {
    const ErrorStats s = error_stats({-0.01, 0.02, -0.03});
    CHECK(s.n == 3);
    CHECK(s.n_over_1s == 0);
    REQUIRE(s.median_abs_s.has_value());
    CHECK(*s.median_abs_s == doctest::Approx(0.02));
    REQUIRE(s.p90_abs_s.has_value());
    CHECK(*s.p90_abs_s == doctest::Approx(0.028));

    const ErrorStats big = error_stats({0.5, -1.5, 2.0});
    CHECK(big.n_over_1s == 2);

    const ErrorStats empty = error_stats({});
    CHECK(empty.n == 0);
    CHECK(!empty.median_abs_s.has_value());
    CHECK(!empty.p90_abs_s.has_value());
}

TEST_CASE("agreement statistics") {
    const std::vector<double> t = {1.0, 2.0, 3.0, 4.0};
    SUBCASE("identical series") {
        const Agreement a = agreement(t, t);
        REQUIRE(a.r.has_value());
        CHECK(*a.r == doctest::Approx(1.0));
        CHECK(a.rmse == 0.0);
        CHECK(a.n == 4);
    }
    SUBCASE("constant positive bias keeps r but costs rmse") {
        std::vector<double> e = t;
        for (double& x : e) {
            x += 1.0;
        }
        const Agreement a = agreement(e, t);
        CHECK(*a.r == doctest::Approx(1.0));
        CHECK(a.rmse == doctest::Approx(1.0));
    }
    SUBCASE("negated series anti-correlates") {
        std::vector<double> e = t;
        for (double& x : e) {
            x = -x;
        }
        CHECK(*agreement(e, t).r == doctest::Approx(-1.0));
    }
    SUBCASE("zero variance leaves r absent") {
        const std::vector<double> flat = {2.0, 2.0, 2.0, 2.0};
        const Agreement a = agreement(flat, t);
        CHECK(!a.r.has_value());
        CHECK(a.rmse > 0.0);
    }
    SUBCASE("r is symmetric in its arguments") {
        const std::vector<double> e = {1.2, 1.8, 3.4, 3.9};
        CHECK(*agreement(e, t).r == doctest::Approx(*agreement(t, e).r));
    }
    SUBCASE("rmse scales with the data") {
        const std::vector<double> e = {1.5, 2.5, 3.5, 4.5};
        std::vector<double> e2 = e, t2 = t;
        for (double& x : e2) {
            x *= 3.0;
        }
        for (double& x : t2) {
            x *= 3.0;
        }
        CHECK(agreement(e2, t2).rmse == doctest::Approx(3.0 * agreement(e, t).rmse));
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(agreement({1.0, 2.0}, {1.0, 2.0}), DataError);
        CHECK_THROWS_AS(agreement({1.0, 2.0, 3.0}, {1.0, 2.0}), DataError);
    }
}

TEST_CASE("first cycles pair by side and drop missing sides") {
    const GaitCycleParams l1 = params_row(Side::Left, 100, 0.6, 0.6, 1.0, 0.1, 0.5);
    const GaitCycleParams l2 = params_row(Side::Left, 105, 0.6, 0.6, 1.0, 0.1, 0.5);
    const GaitCycleParams r1 = params_row(Side::Right, 99, 0.6, 0.6, 1.0, 0.1, 0.5);
    const auto pairs = pair_first_cycles({l2, l1, r1}, {l1, r1});
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].first.cadence_spm == 105);  // first left in estimated order
    CHECK(pairs[0].second.cadence_spm == 100);
    CHECK(pairs[1].first.side == Side::Right);

    CHECK(pair_first_cycles({l1}, {r1}).empty());
    CHECK(pair_first_cycles({}, {l1}).empty());
}

TEST_CASE("evaluate pools errors and applies the exclusion rule") {
    std::vector<TrialEvalInput> trials;
    trials.push_back(exact_trial("good-a", 0.01));
    trials.push_back(exact_trial("good-b", -0.02));

    // A trial with one truth event nobody detected: parameters excluded, but
    // its matched errors still pool.
    TrialEvalInput bad = exact_trial("missing-truth", 0.0);
    bad.truth_events.lfo.push_back(9.0);
    trials.push_back(bad);

    const AgreementReport report = evaluate(trials);
    CHECK(report.trials_evaluated == 2);
    REQUIRE(report.excluded_trials.size() == 1);
    CHECK(report.excluded_trials[0] == "missing-truth");
    CHECK(report.unmatched_truth[2] == 1);

    const int events_per_trial = 3 + 3 + 2 + 3;
    CHECK(report.event_errors.n == 3 * events_per_trial);
    CHECK(static_cast<int>(report.pooled_errors_s.size()) == report.event_errors.n);
    REQUIRE(report.event_errors.median_abs_s.has_value());
    CHECK(*report.event_errors.median_abs_s == doctest::Approx(0.01));

    // Two trials x two sides = 4 pairs per parameter: all six emitted.
    REQUIRE(report.parameters.size() == 6);
    for (const auto& p : report.parameters) {
        CHECK(p.stats.n == 4);
        CHECK(p.stats.rmse == doctest::Approx(0.0));
    }
}

TEST_CASE("evaluate withholds parameters below three pairs") {
    std::vector<TrialEvalInput> trials = {exact_trial("only", 0.0)};
    const AgreementReport report = evaluate(trials);
    CHECK(report.trials_evaluated == 1);
    CHECK(report.parameters.empty());  // 2 pairs < 3
}

TEST_CASE("a matched error beyond one second excludes the trial's parameters") {
    TrialEvalInput t = exact_trial("drifted", 0.0);
    t.detected.lfc[2] = t.truth_events.lfc[2] + 1.2;  // matched but way off
    const AgreementReport report = evaluate({t});
    CHECK(report.trials_evaluated == 0);
    REQUIRE(report.excluded_trials.size() == 1);
    CHECK(report.event_errors.n_over_1s == 1);
}

TEST_CASE("report snapshot covers counts, stats, and parameters") {
    std::vector<TrialEvalInput> trials = {exact_trial("a", 0.0), exact_trial("b", 0.0),
                                          exact_trial("c", 0.0)};
    const AgreementReport report = evaluate(trials);
    std::ostringstream os;
    write_report(os, report);
    const std::string s = os.str();
    CHECK(s.find("trials_evaluated\t3\n") != std::string::npos);
    CHECK(s.find("trials_excluded\t0\n") != std::string::npos);
    CHECK(s.find("event_n\t33\n") != std::string::npos);
    CHECK(s.find("event_median_abs_s\t0\n") != std::string::npos);
    CHECK(s.find("event_n_over_1s\t0\n") != std::string::npos);
    CHECK(s.find("unmatched_lfc\t0\n") != std::string::npos);
    CHECK(s.find("param_cadence_spm_r\t") != std::string::npos);
    CHECK(s.find("param_velocity_mps_rmse\t0\n") != std::string::npos);
    CHECK(s.find("param_single_support_s_n\t6\n") != std::string::npos);
}

TEST_CASE("empty report prints absent statistics") {
    const AgreementReport report = evaluate({});
    std::ostringstream os;
    write_report(os, report);
    const std::string s = os.str();
    CHECK(s.find("event_median_abs_s\tabsent\n") != std::string::npos);
    CHECK(s.find("event_p90_abs_s\tabsent\n") != std::string::npos);
}

TEST_CASE("histogram bins are floor-aligned and contiguous") {
    std::ostringstream os;
    write_error_histogram(os, {-0.011, 0.0, 0.004, 0.031}, 0.010);
    CHECK(os.str() ==
          "bin_lo_s\tbin_hi_s\tcount\n"
          "-0.020000\t-0.010000\t1\n"
          "-0.010000\t0.000000\t0\n"
          "0.000000\t0.010000\t2\n"
          "0.010000\t0.020000\t0\n"
          "0.020000\t0.030000\t0\n"
          "0.030000\t0.040000\t1\n");

    std::ostringstream empty;
    write_error_histogram(empty, {});
    CHECK(empty.str() == "bin_lo_s\tbin_hi_s\tcount\n");
    CHECK_THROWS_AS(write_error_histogram(os, {0.1}, 0.0), DataError);
}

TEST_CASE("comparison tsv is long-format per trial, side, parameter") {
    TrialEvalInput t = exact_trial("cmp", 0.0);
    t.cycle_pairs.resize(1);  // just the left pair
    std::ostringstream os;
    write_comparison_tsv(os, {t});
    CHECK(os.str() ==
          "trial_id\tside\tparameter\testimated\ttruth\n"
          "cmp\tleft\tcadence_spm\t120.000000\t120.000000\n"
          "cmp\tleft\tstep_time_s\t0.500000\t0.500000\n"
          "cmp\tleft\tstep_length_m\t0.600000\t0.600000\n"
          "cmp\tleft\tvelocity_mps\t1.200000\t1.200000\n"
          "cmp\tleft\tdouble_stance_s\t0.120000\t0.120000\n"
          "cmp\tleft\tsingle_support_s\t0.440000\t0.440000\n");
}
