#include "gaitkit/calib.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace gaitkit {

namespace {

constexpr int kParamCount = 11;  // fx fy cx cy w(3) t(3) offset

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d s;
    s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return s;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    const Eigen::Matrix3d k = skew(w);
    if (theta < 1e-12) {
        return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
    }
    return Eigen::Matrix3d::Identity() + std::sin(theta) / theta * k +
           (1.0 - std::cos(theta)) / (theta * theta) * k * k;
}

Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& r) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        out = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return out;
}

double mocap_duration(const Eigen::MatrixXd& mocap, double hz) {
    return static_cast<double>(mocap.rows() - 1) / hz;
}

// Position and left/right-consistent slope of the interpolated mocap at t.
struct MocapSample {
    Eigen::Matrix<double, kSyncJoints, 3> pos;
    Eigen::Matrix<double, kSyncJoints, 3> slope;  // d pos / dt
};

MocapSample mocap_at(const Eigen::MatrixXd& mocap, double hz, double t) {
    const double u = t * hz;
    auto i = static_cast<Eigen::Index>(std::floor(u));
    i = std::clamp<Eigen::Index>(i, 0, mocap.rows() - 2);
    const double frac = u - static_cast<double>(i);

    // Sample breakpoints take the left segment's slope (subgradient choice).
    Eigen::Index s0 = i, s1 = i + 1;
    if (frac == 0.0 && i > 0) {
        s0 = i - 1;
        s1 = i;
    }

    MocapSample out;
    for (int j = 0; j < kSyncJoints; ++j) {
        for (int c = 0; c < 3; ++c) {
            const double a = mocap(i, 3 * j + c);
            const double b = mocap(i + 1, 3 * j + c);
            out.pos(j, c) = a + frac * (b - a);
            out.slope(j, c) = (mocap(s1, 3 * j + c) - mocap(s0, 3 * j + c)) * hz;
        }
    }
    return out;
}

}  // namespace

void validate_problem(const SyncProblem& p) {
    if (!(p.video_fps > 0.0) || !std::isfinite(p.video_fps)) {
        throw DataError("video_fps: must be positive and finite");
    }
    if (!(p.mocap_hz > 0.0) || !std::isfinite(p.mocap_hz)) {
        throw DataError("mocap_hz: must be positive and finite");
    }
    if (!std::isfinite(p.initial_offset)) {
        throw DataError("initial_offset: must be finite");
    }
    if (p.keypoints.rows() < 1 || p.keypoints.cols() != 3 * kSyncJoints) {
        throw DataError("keypoints: expected T x 18 (u, v, confidence per joint)");
    }
    if (p.mocap.rows() < 2 || p.mocap.cols() != 3 * kSyncJoints) {
        throw DataError("mocap: expected T x 18 (x, y, z per joint), at least 2 samples");
    }
    if (!p.keypoints.allFinite() || !p.mocap.allFinite()) {
        throw DataError("sync problem: non-finite value");
    }
    for (Eigen::Index t = 0; t < p.keypoints.rows(); ++t) {
        for (int j = 0; j < kSyncJoints; ++j) {
            if (p.keypoints(t, 3 * j + 2) < 0.0) {
                throw DataError("keypoints: confidence must be non-negative");
            }
        }
    }
}

Eigen::Vector2d project(const CameraModel& camera, const Eigen::Vector3d& point) {
    const Eigen::Vector3d p = camera.rotation * point + camera.translation;
    if (!(p.z() > 0.0)) {
        throw NumericError("projection: point has non-positive depth");
    }
    return {camera.fx * p.x() / p.z() + camera.cx, camera.fy * p.y() / p.z() + camera.cy};
}

Eigen::Matrix<double, kSyncJoints, 3> interpolate_mocap(const Eigen::MatrixXd& mocap,
                                                        double mocap_hz, double t) {
    if (mocap.rows() < 2 || mocap.cols() != 3 * kSyncJoints) {
        throw DataError("mocap: expected T x 18, at least 2 samples");
    }
    if (!(mocap_hz > 0.0)) {
        throw DataError("mocap_hz: must be positive");
    }
    if (t < 0.0 || t > mocap_duration(mocap, mocap_hz)) {
        throw DataError("interpolation time outside mocap range");
    }
    return mocap_at(mocap, mocap_hz, t).pos;
}

double huber(double residual, double delta) {
    if (!(delta > 0.0)) {
        throw DataError("huber delta: must be positive");
    }
    const double a = std::abs(residual);
    if (a <= delta) {
        return 0.5 * a * a;
    }
    return delta * (a - 0.5 * delta);
}

CameraModel initialize(const SyncProblem& problem, const CalibrateConfig& config) {
    validate_problem(problem);

    // Gather correspondences from frames where every joint is confident and
    // the (zero-offset by default) mocap lookup is in range.
    std::vector<Eigen::Vector2d> pts2;
    std::vector<Eigen::Vector3d> pts3;
    const double duration = mocap_duration(problem.mocap, problem.mocap_hz);
    for (Eigen::Index t = 0; t < problem.keypoints.rows(); ++t) {
        bool confident = true;
        for (int j = 0; j < kSyncJoints; ++j) {
            confident = confident &&
                        problem.keypoints(t, 3 * j + 2) > config.confidence_threshold;
        }
        if (!confident) {
            continue;
        }
        const double tm =
            static_cast<double>(t) / problem.video_fps + problem.initial_offset;
        if (tm < 0.0 || tm > duration) {
            continue;
        }
        const auto sample = mocap_at(problem.mocap, problem.mocap_hz, tm);
        for (int j = 0; j < kSyncJoints; ++j) {
            pts2.emplace_back(problem.keypoints(t, 3 * j), problem.keypoints(t, 3 * j + 1));
            pts3.push_back(sample.pos.row(j).transpose());
        }
    }
    if (pts3.size() < 6) {
        throw DataError("insufficient correspondences: need at least 6 confident frames");
    }

    // Coplanar 3D geometry leaves the projection matrix under-determined.
    {
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const auto& x : pts3) {
            mean += x;
        }
        mean /= static_cast<double>(pts3.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& x : pts3) {
            cov += (x - mean) * (x - mean).transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        if (es.eigenvalues()(0) < 1e-8 * std::max(es.eigenvalues()(2), 1e-12)) {
            throw DataError("degenerate configuration: 3D points are coplanar");
        }
    }

    // Hartley-normalized direct linear transform.
    Eigen::Vector2d c2 = Eigen::Vector2d::Zero();
    Eigen::Vector3d c3 = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < pts2.size(); ++i) {
        c2 += pts2[i];
        c3 += pts3[i];
    }
    const double inv_n = 1.0 / static_cast<double>(pts2.size());
    c2 *= inv_n;
    c3 *= inv_n;
    double d2 = 0.0, d3 = 0.0;
    for (std::size_t i = 0; i < pts2.size(); ++i) {
        d2 += (pts2[i] - c2).norm();
        d3 += (pts3[i] - c3).norm();
    }
    d2 = std::max(d2 * inv_n, 1e-12);
    d3 = std::max(d3 * inv_n, 1e-12);
    const double s2 = std::sqrt(2.0) / d2;
    const double s3 = std::sqrt(3.0) / d3;

    Eigen::MatrixXd a(2 * static_cast<Eigen::Index>(pts2.size()), 12);
    for (std::size_t i = 0; i < pts2.size(); ++i) {
        const Eigen::Vector2d x = s2 * (pts2[i] - c2);
        const Eigen::Vector3d big_x = s3 * (pts3[i] - c3);
        Eigen::Matrix<double, 4, 1> xh;
        xh << big_x, 1.0;
        const auto r = static_cast<Eigen::Index>(2 * i);
        a.row(r).setZero();
        a.row(r).segment<4>(0) = xh.transpose();
        a.row(r).segment<4>(8) = -x.x() * xh.transpose();
        a.row(r + 1).setZero();
        a.row(r + 1).segment<4>(4) = xh.transpose();
        a.row(r + 1).segment<4>(8) = -x.y() * xh.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(10) < 1e-10 * sv(0)) {
        throw DataError("degenerate configuration: projection matrix is not unique");
    }
    const Eigen::VectorXd p_vec = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> p_norm;
    p_norm.row(0) = p_vec.segment<4>(0).transpose();
    p_norm.row(1) = p_vec.segment<4>(4).transpose();
    p_norm.row(2) = p_vec.segment<4>(8).transpose();

    // Undo the normalizations: P = T2^-1 * Pn * T3.
    Eigen::Matrix3d t2inv = Eigen::Matrix3d::Identity();
    t2inv(0, 0) = 1.0 / s2;
    t2inv(1, 1) = 1.0 / s2;
    t2inv(0, 2) = c2.x();
    t2inv(1, 2) = c2.y();
    Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity();
    t3.block<3, 3>(0, 0) *= s3;
    t3.block<3, 1>(0, 3) = -s3 * c3;
    Eigen::Matrix<double, 3, 4> p = t2inv * p_norm * t3;

    // Fix the projective scale/sign: unit third-row direction, positive depths.
    const double m3 = p.block<1, 3>(2, 0).norm();
    if (!(m3 > 0.0)) {
        throw DataError("degenerate configuration: zero projection row");
    }
    p /= m3;
    double depth_vote = 0.0;
    for (const auto& x : pts3) {
        depth_vote += p(2, 0) * x.x() + p(2, 1) * x.y() + p(2, 2) * x.z() + p(2, 3);
    }
    if (depth_vote < 0.0) {
        p = -p;
    }

    Eigen::Matrix3d m = p.block<3, 3>(0, 0);
    if (m.determinant() <= 0.0) {
        throw DataError("degenerate configuration: reflected projection");
    }

    // RQ decomposition by Givens rotations: M = K * R.
    Eigen::Matrix3d k = m;
    Eigen::Matrix3d r_acc = Eigen::Matrix3d::Identity();
    {
        // zero k(2,1) with a rotation about the x axis
        double c = k(2, 2), s = k(2, 1);
        double n = std::hypot(c, s);
        Eigen::Matrix3d qx = Eigen::Matrix3d::Identity();
        if (n > 0) {
            c /= n;
            s /= n;
            qx << 1, 0, 0, 0, c, s, 0, -s, c;
        }
        k = k * qx;
        r_acc = qx.transpose() * r_acc;
        // zero k(2,0) with a rotation about the y axis
        c = k(2, 2);
        s = k(2, 0);
        n = std::hypot(c, s);
        Eigen::Matrix3d qy = Eigen::Matrix3d::Identity();
        if (n > 0) {
            c /= n;
            s /= n;
            qy << c, 0, s, 0, 1, 0, -s, 0, c;
        }
        k = k * qy;
        r_acc = qy.transpose() * r_acc;
        // zero k(1,0) with a rotation about the z axis
        c = k(1, 1);
        s = k(1, 0);
        n = std::hypot(c, s);
        Eigen::Matrix3d qz = Eigen::Matrix3d::Identity();
        if (n > 0) {
            c /= n;
            s /= n;
            qz << c, s, 0, -s, c, 0, 0, 0, 1;
        }
        k = k * qz;
        r_acc = qz.transpose() * r_acc;
    }
    // Positive diagonal on K (sign freedom absorbed into R).
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    for (int i = 0; i < 3; ++i) {
        d(i, i) = k(i, i) < 0 ? -1.0 : 1.0;
    }
    k = k * d;
    Eigen::Matrix3d rot = d * r_acc;
    if (!(k(2, 2) > 0.0)) {
        throw DataError("degenerate configuration: invalid intrinsics");
    }
    k /= k(2, 2);

    CameraModel cam;
    cam.fx = k(0, 0);
    cam.fy = k(1, 1);
    cam.cx = k(0, 2);
    cam.cy = k(1, 2);
    cam.rotation = orthonormalized(rot);
    cam.translation = k.inverse() * p.col(3);
    if (!(cam.fx > 0.0 && cam.fy > 0.0)) {
        throw DataError("degenerate configuration: non-positive focal length");
    }
    return cam;
}

double sync_objective(const SyncProblem& problem, const CameraModel& camera, double offset,
                      double delta_px, Eigen::VectorXd* gradient) {
    if (!(delta_px > 0.0)) {
        throw DataError("delta_px: must be positive");
    }
    if (gradient != nullptr) {
        gradient->setZero(kParamCount);
    }
    const double duration = mocap_duration(problem.mocap, problem.mocap_hz);
    double acc = 0.0;
    double wsum = 0.0;
    for (Eigen::Index t = 0; t < problem.keypoints.rows(); ++t) {
        const double tm = static_cast<double>(t) / problem.video_fps + offset;
        if (tm < 0.0 || tm > duration) {
            continue;
        }
        const MocapSample sample = mocap_at(problem.mocap, problem.mocap_hz, tm);
        for (int j = 0; j < kSyncJoints; ++j) {
            const double c = problem.keypoints(t, 3 * j + 2);
            if (c <= 0.0) {
                continue;
            }
            const Eigen::Vector3d x = sample.pos.row(j).transpose();
            const Eigen::Vector3d v = camera.rotation * x;
            const Eigen::Vector3d p = v + camera.translation;
            if (!(p.z() > 0.0)) {
                throw NumericError("calibration: point moved behind the camera");
            }
            const Eigen::Vector2d proj(camera.fx * p.x() / p.z() + camera.cx,
                                       camera.fy * p.y() / p.z() + camera.cy);
            const Eigen::Vector2d obs(problem.keypoints(t, 3 * j),
                                      problem.keypoints(t, 3 * j + 1));
            const Eigen::Vector2d r = proj - obs;
            const double s = r.norm();
            acc += c * huber(s, delta_px);
            wsum += c;

            if (gradient != nullptr && s > 0.0) {
                const double psi = std::min(s, delta_px);  // d huber / d s
                const Eigen::Vector2d dldr = (psi / s) * r;
                Eigen::Matrix<double, 2, 3> jp;
                jp << camera.fx / p.z(), 0.0, -camera.fx * p.x() / (p.z() * p.z()),
                    0.0, camera.fy / p.z(), -camera.fy * p.y() / (p.z() * p.z());
                const Eigen::Vector3d g3 = jp.transpose() * dldr;

                (*gradient)(0) += c * dldr.x() * p.x() / p.z();   // fx
                (*gradient)(1) += c * dldr.y() * p.y() / p.z();   // fy
                (*gradient)(2) += c * dldr.x();                   // cx
                (*gradient)(3) += c * dldr.y();                   // cy
                (*gradient).segment<3>(4) += c * v.cross(g3);     // rotation tangent
                (*gradient).segment<3>(7) += c * g3;              // translation
                const Eigen::Vector3d dxdt = sample.slope.row(j).transpose();
                (*gradient)(10) += c * g3.dot(camera.rotation * dxdt);  // offset
            }
        }
    }
    if (wsum <= 0.0) {
        throw DataError("no usable correspondences in the offset window");
    }
    acc /= wsum;
    if (gradient != nullptr) {
        *gradient /= wsum;
    }
    if (!std::isfinite(acc)) {
        throw NumericError("calibration objective: non-finite value");
    }
    return acc;
}

namespace {

// One Adam descent from the given starting point; fills everything but
// offset_at_boundary.
SyncResult descend(const SyncProblem& problem, const CalibrateConfig& config,
                   const CameraModel& start_camera, double start_offset) {
    SyncResult result;
    result.camera = start_camera;
    result.offset = std::clamp(start_offset, -config.offset_window_s,
                               config.offset_window_s);

    Eigen::VectorXd m = Eigen::VectorXd::Zero(kParamCount);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kParamCount);
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;

    std::vector<double> history;
    Eigen::VectorXd grad(kParamCount);
    for (int iter = 1; iter <= config.max_iters; ++iter) {
        const double loss =
            sync_objective(problem, result.camera, result.offset, config.delta_px, &grad);
        history.push_back(loss);
        result.iterations = iter;

        // Converged when the loss stopped improving over a 20-iteration
        // window. Adam oscillates while the step size is still coarse, which
        // also makes the decrease negative; only a settled plateau (tiny but
        // non-negative decrease) ends the descent early.
        const std::size_t lag = 20;
        if (history.size() > lag) {
            const double before = history[history.size() - 1 - lag];
            const double decrease = (before - loss) / std::max(before, 1e-300);
            if (decrease >= 0.0 && decrease < 1e-8) {
                result.converged = true;
                break;
            }
        }

        // Geometrically decaying step keeps late iterations fine-grained.
        const double lr = config.lr *
                          std::pow(1e-3, static_cast<double>(iter) /
                                             static_cast<double>(config.max_iters));
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = (kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square()).matrix();
        const double bc1 = 1.0 - std::pow(kBeta1, iter);
        const double bc2 = 1.0 - std::pow(kBeta2, iter);
        const Eigen::VectorXd step =
            (lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps)).matrix();

        result.camera.fx = std::max(result.camera.fx - step(0), 1e-6);
        result.camera.fy = std::max(result.camera.fy - step(1), 1e-6);
        result.camera.cx -= step(2);
        result.camera.cy -= step(3);
        result.camera.rotation =
            orthonormalized(rodrigues(-step.segment<3>(4)) * result.camera.rotation);
        result.camera.translation -= step.segment<3>(7);
        result.offset = std::clamp(result.offset - step(10), -config.offset_window_s,
                                   config.offset_window_s);
    }

    result.mean_huber =
        sync_objective(problem, result.camera, result.offset, config.delta_px, nullptr);
    return result;
}

// Starting point for the descent. The linear initializer can go non-physical
// (reflected projection, mirror-handed pose) when the true temporal shift is
// large enough that correspondences at the nominal offset contradict any real
// camera. In that case sweep candidate offsets across the window and start
// from the one whose linear fit reprojects best; rethrow only if every
// candidate is degenerate.
std::pair<CameraModel, double> robust_init(const SyncProblem& problem,
                                           const CalibrateConfig& config, double offset0) {
    try {
        return {initialize(problem, config), offset0};
    } catch (const DataError&) {
        const double w = config.offset_window_s;
        bool found = false;
        CameraModel best_cam;
        double best_offset = offset0;
        double best_loss = 0.0;
        for (int k = -8; k <= 8; ++k) {
            const double candidate = std::clamp(offset0 + 0.125 * k * w, -w, w);
            if (std::abs(candidate - offset0) < 1e-9) {
                continue;  // the nominal offset already failed
            }
            SyncProblem shifted = problem;
            shifted.initial_offset = candidate;
            try {
                const CameraModel cam = initialize(shifted, config);
                const double loss =
                    sync_objective(problem, cam, candidate, config.delta_px, nullptr);
                if (!found || loss < best_loss) {
                    found = true;
                    best_cam = cam;
                    best_offset = candidate;
                    best_loss = loss;
                }
            } catch (const DataError&) {
            } catch (const NumericError&) {
            }
        }
        if (!found) {
            throw;
        }
        return {best_cam, best_offset};
    }
}

}  // namespace

SyncResult calibrate(const SyncProblem& problem, const CalibrateConfig& config) {
    if (config.max_iters < 1) {
        throw DataError("max_iters: must be positive");
    }
    if (!(config.lr > 0.0) || !(config.offset_window_s > 0.0)) {
        throw DataError("calibrate config: lr and offset_window_s must be positive");
    }
    const double offset0 = std::clamp(problem.initial_offset, -config.offset_window_s,
                                      config.offset_window_s);
    const auto [start_camera, start_offset] = robust_init(problem, config, offset0);
    SyncResult best = descend(problem, config, start_camera, start_offset);

    // The linear initializer pairs keypoints with mocap at the configured
    // initial offset, so a real temporal shift biases it toward a wrong but
    // self-consistent camera. Once the offset estimate has moved, re-fit the
    // initializer there and keep whichever optimum reprojects better.
    int total_iterations = best.iterations;
    if (std::abs(best.offset - start_offset) > 1e-6) {
        SyncProblem shifted = problem;
        shifted.initial_offset = best.offset;
        try {
            SyncResult second =
                descend(problem, config, initialize(shifted, config), best.offset);
            total_iterations += second.iterations;
            if (second.mean_huber < best.mean_huber) {
                best = second;
            }
        } catch (const DataError&) {
            // Re-initialization can fail (e.g. no in-range frames at the new
            // offset); the first-round optimum stands.
        } catch (const NumericError&) {
        }
    }
    best.iterations = total_iterations;
    best.offset_at_boundary = std::abs(best.offset) >= config.offset_window_s - 1e-12;
    return best;
}

ScreenDecision screen_trial(const SyncResult& result, const DetectionStats& detection,
                            int sync_frames, bool events_valid) {
    ScreenDecision d;
    if (!(result.mean_huber < 10.0)) {
        d.reasons.push_back("mean huber");
    }
    if (!(std::abs(result.offset) < 0.200)) {
        d.reasons.push_back("offset");
    }
    if (!(detection.frac_missing <= 0.20)) {
        d.reasons.push_back("missing detections");
    }
    if (detection.bbox_swapped) {
        d.reasons.push_back("bbox swapped");
    }
    if (!(sync_frames > 30)) {
        d.reasons.push_back("sync frames");
    }
    if (!events_valid) {
        d.reasons.push_back("events invalid");
    }
    d.accept = d.reasons.empty();
    return d;
}

void write_sync_report(std::ostream& os, const SyncResult& result) {
    char buf[64];
    auto emit = [&](const char* key, double value) {
        std::snprintf(buf, sizeof(buf), "%.9g", value);
        os << key << '\t' << buf << '\n';
    };
    emit("fx", result.camera.fx);
    emit("fy", result.camera.fy);
    emit("cx", result.camera.cx);
    emit("cy", result.camera.cy);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            char key[16];
            std::snprintf(key, sizeof(key), "rotation_%d%d", r, c);
            emit(key, result.camera.rotation(r, c));
        }
    }
    emit("tx", result.camera.translation.x());
    emit("ty", result.camera.translation.y());
    emit("tz", result.camera.translation.z());
    emit("offset_s", result.offset);
    emit("mean_huber", result.mean_huber);
    os << "converged\t" << (result.converged ? "true" : "false") << '\n';
    os << "offset_at_boundary\t" << (result.offset_at_boundary ? "true" : "false") << '\n';
    os << "iterations\t" << result.iterations << '\n';
}

namespace {

Eigen::MatrixXd json_to_matrix(const nlohmann::json& arr, const char* what) {
    if (!arr.is_array() || arr.empty()) {
        throw DataError(std::string(what) + ": expected a non-empty array");
    }
    const auto rows = static_cast<Eigen::Index>(arr.size());
    Eigen::MatrixXd out(rows, 3 * kSyncJoints);
    for (Eigen::Index t = 0; t < rows; ++t) {
        const auto& frame = arr.at(static_cast<std::size_t>(t));
        if (!frame.is_array() || frame.size() != kSyncJoints) {
            throw DataError(std::string(what) + ": each frame needs 6 joints");
        }
        for (int j = 0; j < kSyncJoints; ++j) {
            const auto& triple = frame.at(static_cast<std::size_t>(j));
            if (!triple.is_array() || triple.size() != 3) {
                throw DataError(std::string(what) + ": each joint needs 3 values");
            }
            for (int c = 0; c < 3; ++c) {
                out(t, 3 * j + c) = triple.at(static_cast<std::size_t>(c)).get<double>();
            }
        }
    }
    return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        nlohmann::json frame = nlohmann::json::array();
        for (int j = 0; j < kSyncJoints; ++j) {
            frame.push_back({m(t, 3 * j), m(t, 3 * j + 1), m(t, 3 * j + 2)});
        }
        arr.push_back(std::move(frame));
    }
    return arr;
}

}  // namespace

SyncProblem load_sync_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open sync problem: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& err) {
        throw DataError("sync problem " + path.string() + ": " + err.what());
    }
    SyncProblem p;
    try {
        p.video_fps = doc.at("video_fps").get<double>();
        p.mocap_hz = doc.at("mocap_hz").get<double>();
        p.initial_offset = doc.value("initial_offset", 0.0);
        p.keypoints = json_to_matrix(doc.at("keypoints"), "keypoints");
        p.mocap = json_to_matrix(doc.at("mocap"), "mocap");
    } catch (const nlohmann::json::exception& err) {
        throw DataError("sync problem " + path.string() + ": " + err.what());
    }
    validate_problem(p);
    return p;
}

void save_sync_problem(const SyncProblem& problem, const std::filesystem::path& path) {
    validate_problem(problem);
    nlohmann::json doc;
    doc["video_fps"] = problem.video_fps;
    doc["mocap_hz"] = problem.mocap_hz;
    doc["initial_offset"] = problem.initial_offset;
    doc["keypoints"] = matrix_to_json(problem.keypoints);
    doc["mocap"] = matrix_to_json(problem.mocap);
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write sync problem: " + path.string());
    }
    out << doc.dump(1) << '\n';
    if (!out) {
        throw DataError("failed writing sync problem: " + path.string());
    }
}

}  // namespace gaitkit
