#include "gaitkit/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace gaitkit {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kMinEventGap = 0.2;  // same-type plausibility guard (s)

using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;

Mat5 transition(double dt) {
    Mat5 F = Mat5::Identity();
    F(0, 1) = dt;
    return F;
}

double wrap_pi(double x) {
    double r = std::remainder(x, kTwoPi);
    if (r <= -3.1415926535897932385) {
        r += kTwoPi;
    }
    return r;
}

template <typename M>
void symmetrize(M& P) {
    P = (0.5 * (P + P.transpose())).eval();
}

// Cholesky with one jitter retry; reports the frame on failure.
template <int N>
Eigen::LLT<Eigen::Matrix<double, N, N>> factor(Eigen::Matrix<double, N, N> M, std::size_t frame,
                                               const char* what) {
    symmetrize(M);
    Eigen::LLT<Eigen::Matrix<double, N, N>> llt(M);
    if (llt.info() == Eigen::Success) {
        return llt;
    }
    const double jitter = 1e-9 * std::max(1.0, M.trace());
    M += jitter * Eigen::Matrix<double, N, N>::Identity();
    llt.compute(M);
    if (llt.info() == Eigen::Success) {
        return llt;
    }
    throw NumericError(std::string(what) + " covariance not positive definite at frame " +
                       std::to_string(frame));
}

void check_config(const Eigen::MatrixXd& observations, double dt, const SmootherConfig& cfg) {
    if (observations.cols() != 8) {
        throw DataError("observations: expected 8 columns of quadrature pairs");
    }
    if (observations.rows() < 2) {
        throw DataError("observations: need at least 2 frames");
    }
    if (!observations.allFinite()) {
        throw DataError("observations: non-finite value");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw DataError("dt: must be positive and finite");
    }
    if (!(cfg.min_cadence > 0.0)) {
        throw DataError("min_cadence: must be positive");
    }
    auto check_psd = [](const Eigen::MatrixXd& M, const char* name) {
        if (!M.isApprox(M.transpose(), 1e-9)) {
            throw DataError(std::string(name) + ": must be symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        if (es.eigenvalues().minCoeff() < -1e-9) {
            throw DataError(std::string(name) + ": must be positive semi-definite");
        }
    };
    check_psd(cfg.Q, "Q");
    check_psd(cfg.R, "R");
    check_psd(cfg.P0, "P0");
}

// Wrapped phase of one quadrature pair; an exactly zero pair decodes to 0.
double pair_phase(double c, double s) {
    if (c == 0.0 && s == 0.0) {
        return 0.0;
    }
    return std::atan2(s, c);
}

SmootherState initial_state(const Eigen::MatrixXd& obs, double dt, const SmootherConfig& cfg) {
    SmootherState st;
    const double omega0 = pair_phase(obs(0, 0), obs(0, 1));
    st.x(0) = omega0;
    for (int e = 1; e < 4; ++e) {
        st.x(2 + (e - 1)) = wrap_pi(pair_phase(obs(0, 2 * e), obs(0, 2 * e + 1)) - omega0);
    }

    // Coarse rate estimate: median per-frame increment of the decoded
    // reference phase, floored at the configured minimum.
    std::vector<double> incs;
    incs.reserve(static_cast<std::size_t>(obs.rows()) - 1);
    for (Eigen::Index t = 0; t + 1 < obs.rows(); ++t) {
        const double a = pair_phase(obs(t, 0), obs(t, 1));
        const double b = pair_phase(obs(t + 1, 0), obs(t + 1, 1));
        incs.push_back(wrap_pi(b - a));
    }
    auto mid = incs.begin() + static_cast<std::ptrdiff_t>(incs.size() / 2);
    std::nth_element(incs.begin(), mid, incs.end());
    st.x(1) = std::max(*mid / dt, cfg.min_cadence);

    st.P = cfg.P0;
    return st;
}

}  // namespace

SmootherState predict(const SmootherState& state, double dt, const SmootherConfig& cfg) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) {
        throw DataError("dt: must be non-negative and finite");
    }
    const Mat5 F = transition(dt);
    SmootherState out;
    out.x = F * state.x;
    out.P = F * state.P * F.transpose() + cfg.Q;
    symmetrize(out.P);
    return out;
}

PhaseObservation observe(const Vec5& x) {
    PhaseObservation obs;
    obs.H.setZero();
    for (int e = 0; e < 4; ++e) {
        const double theta = x(0) + (e == 0 ? 0.0 : x(1 + e));
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        obs.y(2 * e) = c;
        obs.y(2 * e + 1) = s;
        obs.H(2 * e, 0) = -s;
        obs.H(2 * e + 1, 0) = c;
        if (e > 0) {
            obs.H(2 * e, 1 + e) = -s;
            obs.H(2 * e + 1, 1 + e) = c;
        }
    }
    return obs;
}

std::vector<SmootherState> smooth(const Eigen::MatrixXd& observations, double dt,
                                  const SmootherConfig& cfg,
                                  const std::optional<SmootherState>& init) {
    check_config(observations, dt, cfg);
    const auto T = static_cast<std::size_t>(observations.rows());
    const Mat5 F = transition(dt);

    std::vector<SmootherState> pred(T), filt(T);
    SmootherState prior = init ? *init : initial_state(observations, dt, cfg);

    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) {
            prior = predict(filt[t - 1], dt, cfg);
        }
        pred[t] = prior;

        const PhaseObservation model = observe(prior.x);
        const Vec8 innovation = observations.row(static_cast<Eigen::Index>(t)).transpose() - model.y;
        const Mat8 S = model.H * prior.P * model.H.transpose() + cfg.R;
        const auto llt = factor<8>(S, t, "innovation");
        const Eigen::Matrix<double, 5, 8> K = llt.solve(model.H * prior.P).transpose();

        SmootherState post;
        post.x = prior.x + K * innovation;
        const Mat5 A = Mat5::Identity() - K * model.H;
        post.P = A * prior.P * A.transpose() + K * cfg.R * K.transpose();
        symmetrize(post.P);
        post.x(1) = std::max(post.x(1), cfg.min_cadence);
        filt[t] = post;
    }

    std::vector<SmootherState> out(T);
    out[T - 1] = filt[T - 1];
    for (std::size_t t = T - 1; t-- > 0;) {
        const auto llt = factor<5>(pred[t + 1].P, t + 1, "prediction");
        const Mat5 C = llt.solve(F * filt[t].P).transpose();
        out[t].x = filt[t].x + C * (out[t + 1].x - pred[t + 1].x);
        out[t].P = filt[t].P + C * (out[t + 1].P - pred[t + 1].P) * C.transpose();
        symmetrize(out[t].P);
        out[t].x(1) = std::max(out[t].x(1), cfg.min_cadence);
    }
    return out;
}

Eigen::MatrixXd phase_matrix(const std::vector<PhaseFrame>& frames) {
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(frames.size()), 8);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        for (int k = 0; k < 8; ++k) {
            obs(static_cast<Eigen::Index>(t), k) = frames[t].q[static_cast<std::size_t>(k)];
        }
    }
    return obs;
}

DetectedEvents detect_events(const std::vector<SmootherState>& smoothed, double dt) {
    if (smoothed.size() < 2) {
        throw DataError("detect_events: need at least 2 smoothed states");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw DataError("dt: must be positive and finite");
    }
    DetectedEvents det;
    for (int e = 0; e < kEventTypes; ++e) {
        std::vector<double>& times = det.events.list(e);
        auto theta = [&](std::size_t t) {
            const Vec5& x = smoothed[t].x;
            return x(0) + (e == 0 ? 0.0 : x(1 + e));
        };
        for (std::size_t t = 0; t + 1 < smoothed.size(); ++t) {
            const double a = theta(t);
            const double b = theta(t + 1);
            if (a == b) {
                continue;
            }
            // Multiples of 2*pi crossed on the half-open span (a, b] (or
            // [b, a) when decreasing), so a level hit exactly at a sample is
            // claimed by the earlier interval only.
            long k_lo, k_hi;
            if (b > a) {
                k_lo = static_cast<long>(std::floor(a / kTwoPi)) + 1;
                k_hi = static_cast<long>(std::floor(b / kTwoPi));
            } else {
                k_lo = static_cast<long>(std::ceil(b / kTwoPi));
                k_hi = static_cast<long>(std::ceil(a / kTwoPi)) - 1;
            }
            for (long k = k_lo; k <= k_hi; ++k) {
                const double level = kTwoPi * static_cast<double>(k);
                const double frac = (level - a) / (b - a);
                times.push_back((static_cast<double>(t) + frac) * dt);
            }
        }
        std::sort(times.begin(), times.end());
        std::vector<double> kept;
        for (double tt : times) {
            if (kept.empty() || tt - kept.back() >= kMinEventGap) {
                kept.push_back(tt);
            }
        }
        times = std::move(kept);
    }
    return det;
}

double reconstruction_residual(const Eigen::MatrixXd& observations,
                               const std::vector<SmootherState>& smoothed) {
    if (static_cast<std::size_t>(observations.rows()) != smoothed.size() ||
        observations.cols() != 8) {
        throw DataError("reconstruction_residual: shape mismatch");
    }
    if (smoothed.empty()) {
        throw DataError("reconstruction_residual: empty input");
    }
    double total = 0.0;
    for (std::size_t t = 0; t < smoothed.size(); ++t) {
        const Vec8 err =
            observations.row(static_cast<Eigen::Index>(t)).transpose() - observe(smoothed[t].x).y;
        total += err.squaredNorm();
    }
    return total / (static_cast<double>(smoothed.size()) * 8.0);
}

void write_events_tsv(std::ostream& os, const std::string& trial_id,
                      const DetectedEvents* detected, const EventAnnotations* ground_truth,
                      bool header) {
    if (header) {
        os << "event_type\ttime_s\tsource\ttrial_id\n";
    }
    char buf[64];
    auto emit = [&](const EventAnnotations& ev, const char* source) {
        for (int e = 0; e < kEventTypes; ++e) {
            for (double t : ev.list(e)) {
                std::snprintf(buf, sizeof(buf), "%.6f", t);
                os << event_type_names()[static_cast<std::size_t>(e)] << '\t' << buf << '\t'
                   << source << '\t' << trial_id << '\n';
            }
        }
    };
    if (detected != nullptr) {
        emit(detected->events, "detected");
    }
    if (ground_truth != nullptr) {
        emit(*ground_truth, "ground_truth");
    }
}

}  // namespace gaitkit
