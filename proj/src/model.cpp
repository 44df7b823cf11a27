#include "gaitkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "gaitkit/random.hpp"

namespace gaitkit {

namespace {

constexpr double kPi = 3.141592653589793238462643383279;
constexpr double kDegPerRad = 180.0 / kPi;
constexpr double kRadPerDeg = kPi / 180.0;
constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr int kInputWidth = 3 * kJointCount;  // flattened joints per frame
constexpr int kHeadWidth = KinematicFrame::kChannels + 2 * kEventTypes;
constexpr std::uint64_t kTrainSeedSalt = 0x9e3779b97f4a7c15ull;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_prime(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Column vector holding the scalar height; keeps the MLP algebra uniform.
Eigen::Matrix<double, 1, 1> height_input(double height_m) {
    Eigen::Matrix<double, 1, 1> h;
    h(0, 0) = height_m;
    return h;
}

Eigen::MatrixXd sinusoidal_positions(Eigen::Index count, Eigen::Index dim) {
    Eigen::MatrixXd pe(count, dim);
    for (Eigen::Index t = 0; t < count; ++t) {
        for (Eigen::Index i = 0; i < dim / 2; ++i) {
            const double rate =
                std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
            const double arg = static_cast<double>(t) * rate;
            pe(t, 2 * i) = std::sin(arg);
            pe(t, 2 * i + 1) = std::cos(arg);
        }
    }
    return pe;
}

// ---------------------------------------------------------------------------
// building blocks

Eigen::MatrixXd linear(const Eigen::MatrixXd& x, const Linear& p) {
    return (x * p.W.transpose()).rowwise() + p.b.transpose();
}

// dW/db accumulated; returns dx.
Eigen::MatrixXd linear_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& x,
                                const Linear& p, Linear& grad) {
    grad.W += dy.transpose() * x;
    grad.b += dy.colwise().sum().transpose();
    return dy * p.W;
}

struct LnCache {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd invstd;
};

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const LayerNormParams& p, LnCache& cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    cache.xhat.resize(n, d);
    cache.invstd.resize(n);
    Eigen::MatrixXd out(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.invstd(r) = inv;
        cache.xhat.row(r) = ((x.row(r).array() - mu) * inv).matrix();
        out.row(r) = (cache.xhat.row(r).array() * p.gamma.transpose().array() +
                      p.beta.transpose().array())
                         .matrix();
    }
    return out;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const LayerNormParams& p,
                                    const LnCache& cache, LayerNormParams& grad) {
    const Eigen::Index n = dy.rows();
    const Eigen::Index d = dy.cols();
    grad.gamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix().transpose();
    grad.beta += dy.colwise().sum().transpose();
    Eigen::MatrixXd dx(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::ArrayXd dxhat =
            dy.row(r).transpose().array() * p.gamma.array();
        const Eigen::ArrayXd xhat = cache.xhat.row(r).transpose().array();
        const double m1 = dxhat.mean();
        const double m2 = (dxhat * xhat).mean();
        dx.row(r) = (cache.invstd(r) * (dxhat - m1 - xhat * m2)).matrix().transpose();
    }
    return dx;
}

// Inverted dropout factors: 0 or 1/(1-p), sampled row-major for determinism.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
    const double keep = 1.0 / (1.0 - p);
    Eigen::MatrixXd mask(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            mask(r, c) = rng.uniform() >= p ? keep : 0.0;
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// forward tapes

struct TokenTape {
    Eigen::MatrixXd pose_in;  // T x 30
    double height = 0;
    Eigen::MatrixXd u1, g1;   // input MLP hidden
    Eigen::VectorXd hu1, hg1; // height MLP hidden
    Eigen::MatrixXd x0;       // (T+1) x D
};

struct LayerTape {
    Eigen::MatrixXd x_in;
    LnCache ln1;
    Eigen::MatrixXd a;                   // ln1 output
    Eigen::MatrixXd q, k, v;
    std::vector<Eigen::MatrixXd> probs;  // per-head softmax
    Eigen::MatrixXd o_concat;
    Eigen::MatrixXd attn_out;            // after wo
    Eigen::MatrixXd attn_mask;           // empty when dropout inactive
    Eigen::MatrixXd x_mid;
    LnCache ln2;
    Eigen::MatrixXd b;                   // ln2 output
    Eigen::MatrixXd h_pre, h_act;        // ff1 pre/post activation
    Eigen::MatrixXd h_mask;
    Eigen::MatrixXd h_dropped;
    Eigen::MatrixXd f_out;               // ff2 output
    Eigen::MatrixXd f_mask;
};

struct StackTape {
    std::vector<LayerTape> layers;
    LnCache ln_final;
    Eigen::MatrixXd y;  // final norm output
    Eigen::MatrixXd z;  // T x 17 head output, angles in radians
};

Eigen::MatrixXd encode_tokens(const ModelParams& p, const Eigen::MatrixXd& pose_in,
                              double height_m, TokenTape* tape) {
    if (pose_in.cols() != kInputWidth) {
        throw DataError("pose input: expected 30 columns");
    }
    if (pose_in.rows() < 1) {
        throw DataError("pose input: need at least one frame");
    }
    const Eigen::Index t_len = pose_in.rows();
    const Eigen::Index d = p.config.embed_dim;

    const Eigen::MatrixXd u1 = linear(pose_in, p.in1);
    const Eigen::MatrixXd g1 = u1.unaryExpr(&gelu);
    const Eigen::MatrixXd u2 = linear(g1, p.in2);

    const Eigen::VectorXd hu1 = p.height1.W * height_m + p.height1.b;
    const Eigen::VectorXd hg1 = hu1.unaryExpr(&gelu);
    const Eigen::VectorXd htok = p.height2.W * hg1 + p.height2.b + p.height_pos;

    Eigen::MatrixXd x0(t_len + 1, d);
    x0.topRows(t_len) = u2 + sinusoidal_positions(t_len, d);
    x0.row(t_len) = htok.transpose();
    if (!x0.allFinite()) {
        throw NumericError("tokens: non-finite value");
    }
    if (tape != nullptr) {
        tape->pose_in = pose_in;
        tape->height = height_m;
        tape->u1 = u1;
        tape->g1 = g1;
        tape->hu1 = hu1;
        tape->hg1 = hg1;
        tape->x0 = x0;
    }
    return x0;
}

void tokens_backward(const ModelParams& p, const TokenTape& tape, const Eigen::MatrixXd& dx0,
                     ModelParams& g) {
    const Eigen::Index t_len = tape.pose_in.rows();

    // height token
    const Eigen::VectorXd dhtok = dx0.row(t_len).transpose();
    g.height_pos += dhtok;
    g.height2.W += dhtok * tape.hg1.transpose();
    g.height2.b += dhtok;
    const Eigen::VectorXd dhg1 = p.height2.W.transpose() * dhtok;
    const Eigen::VectorXd dhu1 =
        (dhg1.array() * tape.hu1.unaryExpr(&gelu_prime).array()).matrix();
    g.height1.W += dhu1 * height_input(tape.height);
    g.height1.b += dhu1;

    // frame tokens (positional encodings are constants)
    const Eigen::MatrixXd du2 = dx0.topRows(t_len);
    const Eigen::MatrixXd dg1 = linear_backward(du2, tape.g1, p.in2, g.in2);
    const Eigen::MatrixXd du1 =
        (dg1.array() * tape.u1.unaryExpr(&gelu_prime).array()).matrix();
    linear_backward(du1, tape.pose_in, p.in1, g.in1);
}

Eigen::MatrixXd run_stack(const ModelParams& p, const Eigen::MatrixXd& tokens, bool train_mode,
                          std::uint64_t dropout_seed, StackTape* tape) {
    const Eigen::Index n = tokens.rows();
    const Eigen::Index d = p.config.embed_dim;
    if (tokens.cols() != d) {
        throw DataError("tokens: width does not match embed_dim");
    }
    if (n < 2) {
        throw DataError("tokens: need at least one frame plus the height token");
    }
    const int heads = p.config.heads;
    const Eigen::Index dh = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool drop = train_mode && p.config.dropout_p > 0.0;
    Rng rng(dropout_seed);

    if (tape != nullptr) {
        tape->layers.resize(p.layers.size());
    }

    Eigen::MatrixXd x = tokens;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const EncoderLayerParams& lp = p.layers[l];
        LayerTape local;
        LayerTape& lt = tape != nullptr ? tape->layers[l] : local;
        lt.x_in = x;

        lt.a = layer_norm(x, lp.ln1, lt.ln1);
        lt.q = linear(lt.a, lp.wq);
        lt.k = linear(lt.a, lp.wk);
        lt.v = linear(lt.a, lp.wv);

        lt.probs.resize(static_cast<std::size_t>(heads));
        lt.o_concat.resize(n, d);
        for (int h = 0; h < heads; ++h) {
            const auto qh = lt.q.middleCols(h * dh, dh);
            const auto kh = lt.k.middleCols(h * dh, dh);
            const auto vh = lt.v.middleCols(h * dh, dh);
            Eigen::MatrixXd scores = att_scale * (qh * kh.transpose());
            for (Eigen::Index r = 0; r < n; ++r) {
                const double m = scores.row(r).maxCoeff();
                const Eigen::RowVectorXd e = (scores.row(r).array() - m).exp().matrix();
                scores.row(r) = e / e.sum();
            }
            lt.probs[static_cast<std::size_t>(h)] = scores;
            lt.o_concat.middleCols(h * dh, dh) = scores * vh;
        }
        lt.attn_out = linear(lt.o_concat, lp.wo);
        Eigen::MatrixXd branch = lt.attn_out;
        if (drop) {
            lt.attn_mask = dropout_mask(n, d, p.config.dropout_p, rng);
            branch = branch.cwiseProduct(lt.attn_mask);
        }
        lt.x_mid = x + branch * lp.scale1.asDiagonal();

        lt.b = layer_norm(lt.x_mid, lp.ln2, lt.ln2);
        lt.h_pre = linear(lt.b, lp.ff1);
        lt.h_act = lt.h_pre.unaryExpr(&gelu);
        lt.h_dropped = lt.h_act;
        if (drop) {
            lt.h_mask = dropout_mask(n, lt.h_act.cols(), p.config.dropout_p, rng);
            lt.h_dropped = lt.h_act.cwiseProduct(lt.h_mask);
        }
        lt.f_out = linear(lt.h_dropped, lp.ff2);
        Eigen::MatrixXd f_branch = lt.f_out;
        if (drop) {
            lt.f_mask = dropout_mask(n, d, p.config.dropout_p, rng);
            f_branch = f_branch.cwiseProduct(lt.f_mask);
        }
        x = lt.x_mid + f_branch * lp.scale2.asDiagonal();

        if (!x.allFinite()) {
            throw NumericError("layer " + std::to_string(l) + ": non-finite activation");
        }
    }

    LnCache local_final;
    LnCache& fc = tape != nullptr ? tape->ln_final : local_final;
    const Eigen::MatrixXd y = layer_norm(x, p.ln_final, fc);
    const Eigen::MatrixXd z = linear(y.topRows(n - 1), p.head);
    if (!z.allFinite()) {
        throw NumericError("head: non-finite output");
    }
    if (tape != nullptr) {
        tape->y = y;
        tape->z = z;
    }
    return z;
}

void stack_backward(const ModelParams& p, const StackTape& tape, const Eigen::MatrixXd& dz,
                    Eigen::MatrixXd& dtokens, ModelParams& g) {
    const Eigen::Index n = tape.y.rows();
    const Eigen::Index d = p.config.embed_dim;
    const int heads = p.config.heads;
    const Eigen::Index dh = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(n, d);
    dy.topRows(n - 1) = linear_backward(dz, tape.y.topRows(n - 1), p.head, g.head);
    Eigen::MatrixXd dx = layer_norm_backward(dy, p.ln_final, tape.ln_final, g.ln_final);

    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const EncoderLayerParams& lp = p.layers[l];
        const LayerTape& lt = tape.layers[l];
        EncoderLayerParams& lg = g.layers[l];

        // feed-forward block: x = x_mid + (dropout(ff2(dropout(gelu(ff1(b)))))) * scale2
        Eigen::MatrixXd f_branch = lt.f_out;  // branch value entering the layer scale
        if (lt.f_mask.size() > 0) {
            f_branch = f_branch.cwiseProduct(lt.f_mask);
        }
        lg.scale2 += (dx.array() * f_branch.array()).colwise().sum().matrix().transpose();
        Eigen::MatrixXd df = dx * lp.scale2.asDiagonal();
        if (lt.f_mask.size() > 0) {
            df = df.cwiseProduct(lt.f_mask);
        }
        Eigen::MatrixXd dh_dropped = linear_backward(df, lt.h_dropped, lp.ff2, lg.ff2);
        if (lt.h_mask.size() > 0) {
            dh_dropped = dh_dropped.cwiseProduct(lt.h_mask);
        }
        const Eigen::MatrixXd dh_pre =
            (dh_dropped.array() * lt.h_pre.unaryExpr(&gelu_prime).array()).matrix();
        const Eigen::MatrixXd db = linear_backward(dh_pre, lt.b, lp.ff1, lg.ff1);
        Eigen::MatrixXd dx_mid = layer_norm_backward(db, lp.ln2, lt.ln2, lg.ln2);
        dx_mid += dx;  // residual

        // attention block: x_mid = x_in + dropout(wo(attend(ln1(x_in)))) * scale1
        Eigen::MatrixXd a_branch = lt.attn_out;
        if (lt.attn_mask.size() > 0) {
            a_branch = a_branch.cwiseProduct(lt.attn_mask);
        }
        lg.scale1 += (dx_mid.array() * a_branch.array()).colwise().sum().matrix().transpose();
        Eigen::MatrixXd dattn = dx_mid * lp.scale1.asDiagonal();
        if (lt.attn_mask.size() > 0) {
            dattn = dattn.cwiseProduct(lt.attn_mask);
        }
        const Eigen::MatrixXd do_concat = linear_backward(dattn, lt.o_concat, lp.wo, lg.wo);

        Eigen::MatrixXd dq(n, d), dk(n, d), dv(n, d);
        for (int h = 0; h < heads; ++h) {
            const auto dos = do_concat.middleCols(h * dh, dh);
            const auto qh = lt.q.middleCols(h * dh, dh);
            const auto kh = lt.k.middleCols(h * dh, dh);
            const auto vh = lt.v.middleCols(h * dh, dh);
            const Eigen::MatrixXd& probs = lt.probs[static_cast<std::size_t>(h)];

            const Eigen::MatrixXd dprobs = dos * vh.transpose();
            dv.middleCols(h * dh, dh) = probs.transpose() * dos;
            Eigen::MatrixXd dscores(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                const double dot = dprobs.row(r).dot(probs.row(r));
                dscores.row(r) =
                    (probs.row(r).array() * (dprobs.row(r).array() - dot)).matrix();
            }
            dq.middleCols(h * dh, dh) = att_scale * (dscores * kh);
            dk.middleCols(h * dh, dh) = att_scale * (dscores.transpose() * qh);
        }

        Eigen::MatrixXd da = linear_backward(dq, lt.a, lp.wq, lg.wq);
        da += linear_backward(dk, lt.a, lp.wk, lg.wk);
        da += linear_backward(dv, lt.a, lp.wv, lg.wv);
        Eigen::MatrixXd dx_in = layer_norm_backward(da, lp.ln1, lt.ln1, lg.ln1);
        dx = dx_in + dx_mid;  // residual
    }
    dtokens = dx;
}

// ---------------------------------------------------------------------------
// loss on the internal head output (angles in radians)

Eigen::MatrixXd internal_kin_targets(const Eigen::MatrixXd& kin_targets_deg) {
    Eigen::MatrixXd t = kin_targets_deg;
    t.leftCols(4) *= kRadPerDeg;
    return t;
}

LossBreakdown head_loss(const Eigen::MatrixXd& z, const TrainExample& ex,
                        double consistency_weight, Eigen::MatrixXd* dz) {
    const Eigen::Index t_len = z.rows();
    if (ex.kin_targets.rows() != t_len || ex.phase_targets.rows() != t_len ||
        ex.phase_weights.rows() != t_len) {
        throw DataError("targets: length mismatch with model output");
    }
    if (!(ex.dt > 0.0)) {
        throw DataError("dt: must be positive");
    }
    if (dz != nullptr) {
        dz->setZero(t_len, kHeadWidth);
    }
    LossBreakdown out;

    // kinematics: plain mean squared error over T x 9
    const Eigen::MatrixXd kin_t = internal_kin_targets(ex.kin_targets);
    const Eigen::MatrixXd kerr = z.leftCols(9) - kin_t;
    const double kin_n = static_cast<double>(t_len) * 9.0;
    out.kinematic = kerr.squaredNorm() / kin_n;
    if (dz != nullptr) {
        dz->leftCols(9) = (2.0 / kin_n) * kerr;
    }

    // phases: per-event weights on both quadrature components, normalized by
    // the total weight so the scale is stable across trials
    const Eigen::MatrixXd qerr = z.rightCols(8) - ex.phase_targets;
    const double wsum = ex.phase_weights.sum();
    if (wsum > 0.0) {
        double acc = 0.0;
        for (Eigen::Index t = 0; t < t_len; ++t) {
            for (int c = 0; c < 8; ++c) {
                const double w = ex.phase_weights(t, c / 2);
                acc += w * qerr(t, c) * qerr(t, c);
                if (dz != nullptr) {
                    (*dz)(t, 9 + c) += w * qerr(t, c) / wsum;
                }
            }
        }
        out.phase = acc / (2.0 * wsum);
    }

    // physical consistency
    if (t_len >= 2 && consistency_weight > 0.0) {
        const double denom = 2.0 * static_cast<double>(t_len - 1);
        double acc = 0.0;
        for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
            for (int side = 0; side < 2; ++side) {
                const int pos = 4 + side;
                const int vel = 7 + side;
                const double e =
                    (z(t, vel) - z(t, 6)) - (z(t + 1, pos) - z(t, pos)) / ex.dt;
                acc += e * e;
                if (dz != nullptr) {
                    const double c = consistency_weight * 2.0 * e / denom;
                    (*dz)(t, vel) += c;
                    (*dz)(t, 6) -= c;
                    (*dz)(t + 1, pos) -= c / ex.dt;
                    (*dz)(t, pos) += c / ex.dt;
                }
            }
        }
        out.consistency = consistency_weight * acc / denom;
    }

    out.total = out.kinematic + out.phase + out.consistency;
    if (!std::isfinite(out.total)) {
        throw NumericError("loss: non-finite value");
    }
    return out;
}

ModelOutput to_output(const Eigen::MatrixXd& z) {
    ModelOutput out;
    out.kinematics = z.leftCols(9);
    out.kinematics.leftCols(4) *= kDegPerRad;
    out.phase_q = z.rightCols(8);
    return out;
}

Eigen::MatrixXd from_output(const ModelOutput& out) {
    if (out.kinematics.rows() != out.phase_q.rows() || out.kinematics.cols() != 9 ||
        out.phase_q.cols() != 8) {
        throw DataError("model output: bad shape");
    }
    Eigen::MatrixXd z(out.kinematics.rows(), kHeadWidth);
    z.leftCols(9) = out.kinematics;
    z.leftCols(4) *= kRadPerDeg;
    z.rightCols(8) = out.phase_q;
    return z;
}

int bucket_batch_size(const ModelConfig& cfg, Eigen::Index t_len) {
    for (const auto& [max_len, size] : cfg.buckets) {
        if (t_len <= max_len) {
            return size;
        }
    }
    return cfg.buckets.back().second;
}

double accumulate_batch(const ModelParams& params,
                        const std::vector<const TrainExample*>& batch, bool train_mode,
                        std::uint64_t dropout_seed, ModelParams& grads) {
    if (batch.empty()) {
        throw DataError("batch: empty");
    }
    for (TensorRef& ref : tensor_refs(grads)) {
        Eigen::Map<Eigen::VectorXd>(ref.data, ref.size()).setZero();
    }
    Rng seeds(dropout_seed);
    double total = 0.0;
    for (const TrainExample* ex : batch) {
        TokenTape tok;
        StackTape stack;
        encode_tokens(params, ex->pose_input, ex->height_m, &tok);
        run_stack(params, tok.x0, train_mode, seeds.next_u64(), &stack);

        Eigen::MatrixXd dz;
        total += head_loss(stack.z, *ex, params.config.consistency_weight, &dz).total;

        Eigen::MatrixXd dtokens;
        stack_backward(params, stack, dz, dtokens, grads);
        tokens_backward(params, tok, dtokens, grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (TensorRef& ref : tensor_refs(grads)) {
        Eigen::Map<Eigen::VectorXd> flat(ref.data, ref.size());
        flat *= inv;
        if (!flat.allFinite()) {
            throw NumericError("gradient " + ref.name + ": non-finite value");
        }
    }
    return total * inv;
}

}  // namespace

ModelConfig ModelConfig::full_scale() {
    ModelConfig cfg;
    cfg.layers = 6;
    cfg.heads = 6;
    // Nearest width to 256 that splits evenly across the 6 heads.
    cfg.embed_dim = 252;
    cfg.mlp_hidden = 512;
    cfg.dropout_p = 0.1;
    cfg.lr = 1e-4;
    cfg.epochs = 150;
    cfg.consistency_weight = 1e-4;
    cfg.buckets = {{30, 128}, {300, 32}};
    return cfg;
}

void ModelConfig::validate() const {
    if (layers < 1) {
        throw DataError("config.layers: must be at least 1");
    }
    if (heads < 1) {
        throw DataError("config.heads: must be at least 1");
    }
    if (embed_dim < 2 || embed_dim % heads != 0 || embed_dim % 2 != 0) {
        throw DataError("config.embed_dim: must be even and divisible by heads");
    }
    if (mlp_hidden < 1) {
        throw DataError("config.mlp_hidden: must be at least 1");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw DataError("config.dropout_p: must be in [0, 1)");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw DataError("config.lr: must be non-negative and finite");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw DataError("config.weight_decay: must be non-negative and finite");
    }
    if (epochs < 0) {
        throw DataError("config.epochs: must be non-negative");
    }
    if (!(consistency_weight >= 0.0) || !std::isfinite(consistency_weight)) {
        throw DataError("config.consistency_weight: must be non-negative and finite");
    }
    if (buckets.empty()) {
        throw DataError("config.buckets: must not be empty");
    }
    int prev_len = 0;
    for (const auto& [max_len, size] : buckets) {
        if (max_len <= prev_len) {
            throw DataError("config.buckets: max lengths must be ascending");
        }
        if (size < 1) {
            throw DataError("config.buckets: batch sizes must be positive");
        }
        prev_len = max_len;
    }
}

namespace {

void init_linear(Linear& lin, Eigen::Index out, Eigen::Index in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    lin.W.resize(out, in);
    lin.b.resize(out);
    for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) {
            lin.W(r, c) = rng.uniform(-bound, bound);
        }
    }
    for (Eigen::Index r = 0; r < out; ++r) {
        lin.b(r) = rng.uniform(-bound, bound);
    }
}

void init_norm(LayerNormParams& ln, Eigen::Index d) {
    ln.gamma = Eigen::VectorXd::Ones(d);
    ln.beta = Eigen::VectorXd::Zero(d);
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    ModelParams p;
    p.config = cfg;
    const Eigen::Index d = cfg.embed_dim;
    init_linear(p.in1, d, kInputWidth, rng);
    init_linear(p.in2, d, d, rng);
    init_linear(p.height1, d, 1, rng);
    init_linear(p.height2, d, d, rng);
    p.height_pos.resize(d);
    const double hb = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        p.height_pos(i) = rng.uniform(-hb, hb);
    }
    p.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (EncoderLayerParams& lp : p.layers) {
        init_norm(lp.ln1, d);
        init_norm(lp.ln2, d);
        init_linear(lp.wq, d, d, rng);
        init_linear(lp.wk, d, d, rng);
        init_linear(lp.wv, d, d, rng);
        init_linear(lp.wo, d, d, rng);
        init_linear(lp.ff1, cfg.mlp_hidden, d, rng);
        init_linear(lp.ff2, d, cfg.mlp_hidden, rng);
        lp.scale1 = Eigen::VectorXd::Constant(d, 1e-2);
        lp.scale2 = Eigen::VectorXd::Constant(d, 1e-2);
    }
    init_norm(p.ln_final, d);
    init_linear(p.head, kHeadWidth, d, rng);
    return p;
}

ModelParams zeros_like(const ModelParams& like) {
    ModelParams z = like;
    for (TensorRef& ref : tensor_refs(z)) {
        Eigen::Map<Eigen::VectorXd>(ref.data, ref.size()).setZero();
    }
    return z;
}

std::vector<TensorRef> tensor_refs(ModelParams& p) {
    std::vector<TensorRef> refs;
    auto add_mat = [&](const std::string& name, Eigen::MatrixXd& m) {
        refs.push_back({name, m.data(), m.rows(), m.cols()});
    };
    auto add_vec = [&](const std::string& name, Eigen::VectorXd& v) {
        refs.push_back({name, v.data(), v.rows(), 1});
    };
    auto add_linear = [&](const std::string& name, Linear& lin) {
        add_mat(name + ".W", lin.W);
        add_vec(name + ".b", lin.b);
    };
    auto add_norm = [&](const std::string& name, LayerNormParams& ln) {
        add_vec(name + ".gamma", ln.gamma);
        add_vec(name + ".beta", ln.beta);
    };
    add_linear("in1", p.in1);
    add_linear("in2", p.in2);
    add_linear("height1", p.height1);
    add_linear("height2", p.height2);
    add_vec("height_pos", p.height_pos);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const std::string base = "layer" + std::to_string(l) + ".";
        EncoderLayerParams& lp = p.layers[l];
        add_norm(base + "ln1", lp.ln1);
        add_linear(base + "wq", lp.wq);
        add_linear(base + "wk", lp.wk);
        add_linear(base + "wv", lp.wv);
        add_linear(base + "wo", lp.wo);
        add_norm(base + "ln2", lp.ln2);
        add_linear(base + "ff1", lp.ff1);
        add_linear(base + "ff2", lp.ff2);
        add_vec(base + "scale1", lp.scale1);
        add_vec(base + "scale2", lp.scale2);
    }
    add_norm("final_ln", p.ln_final);
    add_linear("head", p.head);
    return refs;
}

std::size_t parameter_count(const ModelParams& params) {
    std::size_t n = 0;
    for (const TensorRef& ref : tensor_refs(const_cast<ModelParams&>(params))) {
        n += static_cast<std::size_t>(ref.size());
    }
    return n;
}

TrainExample make_example(const Trial& trial) {
    if (!trial.gt_kinematics.has_value()) {
        throw DataError("trial " + trial.id + ": missing ground-truth kinematics");
    }
    if (!trial.gt_events.has_value()) {
        throw DataError("trial " + trial.id + ": missing ground-truth events");
    }
    const std::vector<CanonicalPose> poses = normalize_sequence(trial);
    const auto t_len = static_cast<Eigen::Index>(poses.size());

    TrainExample ex;
    ex.pose_input.resize(t_len, kInputWidth);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        for (int j = 0; j < kJointCount; ++j) {
            const Vec3& v = poses[static_cast<std::size_t>(t)].joints[static_cast<std::size_t>(j)];
            ex.pose_input(t, 3 * j + 0) = v.x();
            ex.pose_input(t, 3 * j + 1) = v.y();
            ex.pose_input(t, 3 * j + 2) = v.z();
        }
    }
    ex.height_m = trial.subject_height;
    ex.dt = trial.dt();

    ex.kin_targets.resize(t_len, 9);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        for (int c = 0; c < 9; ++c) {
            ex.kin_targets(t, c) = (*trial.gt_kinematics)[static_cast<std::size_t>(t)].channel(c);
        }
    }

    std::vector<double> times(static_cast<std::size_t>(t_len));
    for (std::size_t i = 0; i < times.size(); ++i) {
        times[i] = trial.frame_time(i);
    }
    const EncodedPhases enc = encode(*trial.gt_events, times);
    ex.phase_targets.resize(t_len, 8);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        for (int c = 0; c < 8; ++c) {
            ex.phase_targets(t, c) = enc.frames[static_cast<std::size_t>(t)].q[static_cast<std::size_t>(c)];
        }
    }
    ex.phase_weights = enc.targets.weights;
    return ex;
}

Eigen::MatrixXd tokenize(const std::vector<CanonicalPose>& poses, double height_m,
                         const ModelParams& params) {
    params.config.validate();
    Eigen::MatrixXd pose_in(static_cast<Eigen::Index>(poses.size()), kInputWidth);
    for (std::size_t t = 0; t < poses.size(); ++t) {
        for (int j = 0; j < kJointCount; ++j) {
            const Vec3& v = poses[t].joints[static_cast<std::size_t>(j)];
            pose_in(static_cast<Eigen::Index>(t), 3 * j + 0) = v.x();
            pose_in(static_cast<Eigen::Index>(t), 3 * j + 1) = v.y();
            pose_in(static_cast<Eigen::Index>(t), 3 * j + 2) = v.z();
        }
    }
    return encode_tokens(params, pose_in, height_m, nullptr);
}

ModelOutput forward(const ModelParams& params, const Eigen::MatrixXd& tokens, bool train_mode,
                    std::uint64_t dropout_seed) {
    return to_output(run_stack(params, tokens, train_mode, dropout_seed, nullptr));
}

Eigen::MatrixXd consistency_error(const ModelOutput& out, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw DataError("dt: must be positive and finite");
    }
    const Eigen::Index t_len = out.kinematics.rows();
    if (t_len < 2) {
        throw DataError("consistency_error: need at least 2 frames");
    }
    Eigen::MatrixXd e(t_len - 1, 2);
    for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
        for (int side = 0; side < 2; ++side) {
            const double vel = out.kinematics(t, 7 + side);
            const double pelvis = out.kinematics(t, 6);
            const double dp = out.kinematics(t + 1, 4 + side) - out.kinematics(t, 4 + side);
            e(t, side) = (vel - pelvis) - dp / dt;
        }
    }
    return e;
}

LossBreakdown loss(const ModelOutput& out, const TrainExample& targets,
                   double consistency_weight) {
    return head_loss(from_output(out), targets, consistency_weight, nullptr);
}

double loss_and_gradients(const ModelParams& params, const std::vector<TrainExample>& batch,
                          bool train_mode, std::uint64_t dropout_seed, ModelParams& grads) {
    std::vector<const TrainExample*> ptrs;
    ptrs.reserve(batch.size());
    for (const TrainExample& ex : batch) {
        ptrs.push_back(&ex);
    }
    return accumulate_batch(params, ptrs, train_mode, dropout_seed, grads);
}

TrainResult train(const std::vector<Trial>& dataset, const ModelConfig& cfg) {
    cfg.validate();
    TrainResult result;
    result.params = init_params(cfg);

    std::vector<TrainExample> examples;
    for (const Trial& trial : dataset) {
        if (!trial.gt_kinematics.has_value() || !trial.gt_events.has_value()) {
            ++result.skipped_trials;
            continue;
        }
        examples.push_back(make_example(trial));
    }
    if (examples.empty()) {
        throw DataError("train: no trials with ground-truth targets");
    }
    if (cfg.epochs == 0) {
        return result;
    }

    // Pad-free batching: group by exact length, then cut bucket-sized batches.
    std::map<Eigen::Index, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        groups[examples[i].pose_input.rows()].push_back(i);
    }

    Rng rng(cfg.seed ^ kTrainSeedSalt);
    ModelParams grads = zeros_like(result.params);

    std::vector<TensorRef> prefs = tensor_refs(result.params);
    std::vector<Eigen::VectorXd> m(prefs.size()), v(prefs.size());
    for (std::size_t i = 0; i < prefs.size(); ++i) {
        m[i] = Eigen::VectorXd::Zero(prefs[i].size());
        v[i] = Eigen::VectorXd::Zero(prefs[i].size());
    }
    long step = 0;
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kAdamEps = 1e-8;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::vector<std::size_t>> batches;
        for (auto& [t_len, idxs] : groups) {
            std::vector<std::size_t> order = idxs;
            rng.shuffle(order);
            const auto bsize = static_cast<std::size_t>(bucket_batch_size(cfg, t_len));
            for (std::size_t at = 0; at < order.size(); at += bsize) {
                const std::size_t end = std::min(order.size(), at + bsize);
                batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
            }
        }
        rng.shuffle(batches);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (const std::vector<std::size_t>& batch_idx : batches) {
            std::vector<const TrainExample*> batch;
            batch.reserve(batch_idx.size());
            for (std::size_t i : batch_idx) {
                batch.push_back(&examples[i]);
            }
            double batch_loss;
            try {
                batch_loss = accumulate_batch(result.params, batch, true, rng.next_u64(), grads);
            } catch (const NumericError& err) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                   err.what());
            }
            epoch_loss += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();

            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            std::vector<TensorRef> grefs = tensor_refs(grads);
            for (std::size_t i = 0; i < prefs.size(); ++i) {
                Eigen::Map<Eigen::ArrayXd> theta(prefs[i].data, prefs[i].size());
                Eigen::Map<const Eigen::ArrayXd> g(grefs[i].data, grefs[i].size());
                m[i].array() = kBeta1 * m[i].array() + (1.0 - kBeta1) * g;
                v[i].array() = kBeta2 * v[i].array() + (1.0 - kBeta2) * g.square();
                theta -= cfg.lr * ((m[i].array() / bc1) / ((v[i].array() / bc2).sqrt() + kAdamEps) +
                                   cfg.weight_decay * theta);
            }
        }
        const double mean_loss = epoch_loss / static_cast<double>(seen);
        if (!std::isfinite(mean_loss)) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch));
        }
        result.loss_trace.push_back(mean_loss);
    }
    return result;
}

ModelOutput infer(const Trial& trial, const ModelParams& params) {
    const std::vector<CanonicalPose> poses = normalize_sequence(trial);
    const Eigen::MatrixXd tokens = tokenize(poses, trial.subject_height, params);
    return forward(params, tokens, false, 0);
}

namespace {

nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["layers"] = cfg.layers;
    j["heads"] = cfg.heads;
    j["embed_dim"] = cfg.embed_dim;
    j["mlp_hidden"] = cfg.mlp_hidden;
    j["dropout_p"] = cfg.dropout_p;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["epochs"] = cfg.epochs;
    j["consistency_weight"] = cfg.consistency_weight;
    j["seed"] = cfg.seed;
    j["buckets"] = nlohmann::json::array();
    for (const auto& [len, size] : cfg.buckets) {
        j["buckets"].push_back({len, size});
    }
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    try {
        cfg.layers = j.at("layers").get<int>();
        cfg.heads = j.at("heads").get<int>();
        cfg.embed_dim = j.at("embed_dim").get<int>();
        cfg.mlp_hidden = j.at("mlp_hidden").get<int>();
        cfg.dropout_p = j.at("dropout_p").get<double>();
        cfg.lr = j.at("lr").get<double>();
        cfg.weight_decay = j.at("weight_decay").get<double>();
        cfg.epochs = j.at("epochs").get<int>();
        cfg.consistency_weight = j.at("consistency_weight").get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.buckets.clear();
        for (const auto& pair : j.at("buckets")) {
            cfg.buckets.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
        }
    } catch (const nlohmann::json::exception& err) {
        throw DataError(std::string("checkpoint config: ") + err.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace

void save_checkpoint(const ModelParams& params, int epochs_trained,
                     const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["format"] = "gait-model-checkpoint-v1";
    doc["config"] = config_to_json(params.config);
    doc["epochs_trained"] = epochs_trained;
    nlohmann::json tensors = nlohmann::json::object();
    for (const TensorRef& ref : tensor_refs(const_cast<ModelParams&>(params))) {
        nlohmann::json entry;
        entry["rows"] = ref.rows;
        entry["cols"] = ref.cols;
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(ref.size()));
        Eigen::Map<const Eigen::MatrixXd> mat(ref.data, ref.rows, ref.cols);
        for (Eigen::Index r = 0; r < ref.rows; ++r) {
            for (Eigen::Index c = 0; c < ref.cols; ++c) {
                data.push_back(mat(r, c));
            }
        }
        entry["data"] = std::move(data);
        tensors[ref.name] = std::move(entry);
    }
    doc["tensors"] = std::move(tensors);

    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write checkpoint: " + path.string());
    }
    out << doc.dump(1) << '\n';
    if (!out) {
        throw DataError("failed writing checkpoint: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open checkpoint: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& err) {
        throw DataError("checkpoint " + path.string() + ": " + err.what());
    }
    if (doc.value("format", "") != "gait-model-checkpoint-v1") {
        throw DataError("checkpoint " + path.string() + ": unknown format");
    }
    Checkpoint ck;
    ck.params = init_params(config_from_json(doc.at("config")));
    try {
        ck.epochs_trained = doc.at("epochs_trained").get<int>();
        const nlohmann::json& tensors = doc.at("tensors");
        std::size_t used = 0;
        for (TensorRef& ref : tensor_refs(ck.params)) {
            if (!tensors.contains(ref.name)) {
                throw DataError("checkpoint tensor " + ref.name + ": missing");
            }
            const nlohmann::json& entry = tensors.at(ref.name);
            if (entry.at("rows").get<Eigen::Index>() != ref.rows ||
                entry.at("cols").get<Eigen::Index>() != ref.cols) {
                throw DataError("checkpoint tensor " + ref.name + ": shape mismatch");
            }
            const auto& data = entry.at("data");
            if (static_cast<Eigen::Index>(data.size()) != ref.size()) {
                throw DataError("checkpoint tensor " + ref.name + ": bad element count");
            }
            Eigen::Map<Eigen::MatrixXd> mat(ref.data, ref.rows, ref.cols);
            std::size_t at = 0;
            for (Eigen::Index r = 0; r < ref.rows; ++r) {
                for (Eigen::Index c = 0; c < ref.cols; ++c) {
                    mat(r, c) = data.at(at++).get<double>();
                }
            }
            ++used;
        }
        if (tensors.size() != used) {
            throw DataError("checkpoint: unexpected extra tensors");
        }
    } catch (const nlohmann::json::exception& err) {
        throw DataError("checkpoint " + path.string() + ": " + err.what());
    }
    return ck;
}

}  // namespace gaitkit
