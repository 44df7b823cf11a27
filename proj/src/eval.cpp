#include "gaitkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

namespace gaitkit {

namespace {

constexpr double kMatchWindow = 1.0;  // seconds

double nearest(const std::vector<double>& sorted, double t) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    double best = std::numeric_limits<double>::infinity();
    if (it != sorted.end()) {
        best = *it;
    }
    if (it != sorted.begin() && std::abs(*(it - 1) - t) <= std::abs(best - t)) {
        best = *(it - 1);
    }
    return best;
}

}  // namespace

int MatchResult::unmatched_total() const {
    return std::accumulate(unmatched_truth.begin(), unmatched_truth.end(), 0);
}

MatchResult match_events(const EventAnnotations& detected, const EventAnnotations& truth) {
    MatchResult out;
    for (int type = 0; type < kEventTypes; ++type) {
        std::vector<double> det = detected.list(type);
        std::vector<double> gt = truth.list(type);
        std::sort(det.begin(), det.end());
        std::sort(gt.begin(), gt.end());
        out.detected_total += static_cast<int>(det.size());
        out.truth_total += static_cast<int>(gt.size());
        for (double t : det) {
            if (gt.empty()) {
                break;
            }
            EventMatch m;
            m.event_type = type;
            m.detected_s = t;
            m.truth_s = nearest(gt, t);
            m.error_s = m.detected_s - m.truth_s;
            out.matches.push_back(m);
        }
        for (double t : gt) {
            if (det.empty() || std::abs(nearest(det, t) - t) > kMatchWindow) {
                ++out.unmatched_truth[static_cast<std::size_t>(type)];
            }
        }
    }
    return out;
}

MatchResult match_events(const DetectedEvents& detected, const EventAnnotations& truth) {
    return match_events(detected.events, truth);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) {
        throw DataError("percentile: empty input");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError("percentile: p must be in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double rank = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    if (lo + 1 >= values.size()) {
        return values.back();
    }
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

ErrorStats error_stats(const std::vector<double>& errors_s) {
    ErrorStats out;
    out.n = static_cast<int>(errors_s.size());
    if (errors_s.empty()) {
        return out;
    }
    std::vector<double> abs_errors(errors_s.size());
    std::transform(errors_s.begin(), errors_s.end(), abs_errors.begin(),
                   [](double e) { return std::abs(e); });
    out.n_over_1s = static_cast<int>(
        std::count_if(abs_errors.begin(), abs_errors.end(), [](double a) { return a > 1.0; }));
    out.median_abs_s = percentile(abs_errors, 0.5);
    out.p90_abs_s = percentile(std::move(abs_errors), 0.9);
    return out;
}

Agreement agreement(const std::vector<double>& estimated, const std::vector<double>& truth) {
    if (estimated.size() != truth.size()) {
        throw DataError("agreement: input lengths differ");
    }
    if (estimated.size() < 3) {
        throw DataError("agreement: need at least 3 pairs");
    }
    Agreement out;
    out.n = static_cast<int>(estimated.size());
    const double n = static_cast<double>(out.n);
    const double mean_e = std::accumulate(estimated.begin(), estimated.end(), 0.0) / n;
    const double mean_t = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
    double cov = 0, var_e = 0, var_t = 0, sq = 0;
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        const double de = estimated[i] - mean_e;
        const double dt = truth[i] - mean_t;
        cov += de * dt;
        var_e += de * de;
        var_t += dt * dt;
        const double diff = estimated[i] - truth[i];
        sq += diff * diff;
    }
    out.rmse = std::sqrt(sq / n);
    if (var_e > 0.0 && var_t > 0.0) {
        out.r = std::clamp(cov / std::sqrt(var_e * var_t), -1.0, 1.0);
    }
    return out;
}

std::vector<std::pair<GaitCycleParams, GaitCycleParams>> pair_first_cycles(
    const std::vector<GaitCycleParams>& estimated, const std::vector<GaitCycleParams>& truth) {
    std::vector<std::pair<GaitCycleParams, GaitCycleParams>> out;
    for (Side side : {Side::Left, Side::Right}) {
        auto pick = [side](const std::vector<GaitCycleParams>& rows)
            -> const GaitCycleParams* {
            for (const auto& row : rows) {
                if (row.side == side) {
                    return &row;
                }
            }
            return nullptr;
        };
        const GaitCycleParams* e = pick(estimated);
        const GaitCycleParams* t = pick(truth);
        if (e != nullptr && t != nullptr) {
            out.emplace_back(*e, *t);
        }
    }
    return out;
}

namespace {

struct ParamColumn {
    const char* name;
    double GaitCycleParams::*member;
};

constexpr ParamColumn kParamColumns[] = {
    {"cadence_spm", &GaitCycleParams::cadence_spm},
    {"step_time_s", &GaitCycleParams::step_time_s},
    {"step_length_m", &GaitCycleParams::step_length_m},
    {"velocity_mps", &GaitCycleParams::velocity_mps},
    {"double_stance_s", &GaitCycleParams::double_stance_s},
    {"single_support_s", &GaitCycleParams::single_support_s},
};

}  // namespace

AgreementReport evaluate(const std::vector<TrialEvalInput>& trials) {
    AgreementReport report;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> columns;
    for (const auto& col : kParamColumns) {
        columns[col.name];
    }

    for (const auto& trial : trials) {
        const MatchResult mr = match_events(trial.detected, trial.truth_events);
        bool over_1s = false;
        for (const auto& m : mr.matches) {
            report.pooled_errors_s.push_back(m.error_s);
            over_1s = over_1s || std::abs(m.error_s) > kMatchWindow;
        }
        for (int type = 0; type < kEventTypes; ++type) {
            report.unmatched_truth[static_cast<std::size_t>(type)] +=
                mr.unmatched_truth[static_cast<std::size_t>(type)];
        }
        if (mr.unmatched_total() > 0 || over_1s) {
            report.excluded_trials.push_back(trial.trial_id);
            continue;
        }
        ++report.trials_evaluated;
        for (const auto& [est, truth] : trial.cycle_pairs) {
            for (const auto& col : kParamColumns) {
                columns[col.name].first.push_back(est.*col.member);
                columns[col.name].second.push_back(truth.*col.member);
            }
        }
    }

    report.event_errors = error_stats(report.pooled_errors_s);
    for (const auto& col : kParamColumns) {
        const auto& [est, truth] = columns[col.name];
        if (est.size() >= 3) {
            report.parameters.push_back({col.name, agreement(est, truth)});
        }
    }
    return report;
}

namespace {

void emit(std::ostream& os, const char* key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    os << key << '\t' << buf << '\n';
}

void emit(std::ostream& os, const std::string& key, const std::optional<double>& value) {
    if (value.has_value()) {
        emit(os, key.c_str(), *value);
    } else {
        os << key << "\tabsent\n";
    }
}

}  // namespace

void write_report(std::ostream& os, const AgreementReport& report) {
    os << "trials_evaluated\t" << report.trials_evaluated << '\n';
    os << "trials_excluded\t" << report.excluded_trials.size() << '\n';
    for (const auto& id : report.excluded_trials) {
        os << "excluded_trial\t" << id << '\n';
    }
    os << "event_n\t" << report.event_errors.n << '\n';
    emit(os, "event_median_abs_s", report.event_errors.median_abs_s);
    emit(os, "event_p90_abs_s", report.event_errors.p90_abs_s);
    os << "event_n_over_1s\t" << report.event_errors.n_over_1s << '\n';
    for (int type = 0; type < kEventTypes; ++type) {
        os << "unmatched_" << event_type_names()[static_cast<std::size_t>(type)] << '\t'
           << report.unmatched_truth[static_cast<std::size_t>(type)] << '\n';
    }
    for (const auto& p : report.parameters) {
        emit(os, "param_" + p.name + "_r", p.stats.r);
        emit(os, ("param_" + p.name + "_rmse").c_str(), p.stats.rmse);
        os << "param_" << p.name << "_n\t" << p.stats.n << '\n';
    }
}

void write_error_histogram(std::ostream& os, const std::vector<double>& errors_s,
                           double bin_s) {
    if (!(bin_s > 0.0)) {
        throw DataError("histogram bin width must be positive");
    }
    os << "bin_lo_s\tbin_hi_s\tcount\n";
    if (errors_s.empty()) {
        return;
    }
    std::map<long long, int> bins;
    for (double e : errors_s) {
        ++bins[static_cast<long long>(std::floor(e / bin_s))];
    }
    const long long lo = bins.begin()->first;
    const long long hi = bins.rbegin()->first;
    char buf[128];
    for (long long k = lo; k <= hi; ++k) {
        const auto it = bins.find(k);
        const int count = it == bins.end() ? 0 : it->second;
        std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t%d",
                      static_cast<double>(k) * bin_s,
                      static_cast<double>(k + 1) * bin_s, count);
        os << buf << '\n';
    }
}

void write_comparison_tsv(std::ostream& os, const std::vector<TrialEvalInput>& trials) {
    os << "trial_id\tside\tparameter\testimated\ttruth\n";
    char buf[128];
    for (const auto& trial : trials) {
        for (const auto& [est, truth] : trial.cycle_pairs) {
            for (const auto& col : kParamColumns) {
                std::snprintf(buf, sizeof(buf), "%.6f\t%.6f", est.*col.member,
                              truth.*col.member);
                os << trial.trial_id << '\t' << side_name(est.side) << '\t' << col.name
                   << '\t' << buf << '\n';
            }
        }
    }
}

}  // namespace gaitkit
