#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gaitkit/core.hpp"
#include "gaitkit/phase_codec.hpp"
#include "gaitkit/pose_normalize.hpp"

// Sequence model mapping canonicalized 3D pose sequences plus subject height
// to per-frame kinematic channels and quadrature-encoded gait-event phases.
// Pre-norm transformer encoder, trained with exact hand-derived gradients.
//
// Channel layout of the 17-wide head, fixed everywhere:
//   0..8   kinematics in KinematicFrame order (angles kept in radians
//          internally, degrees at the API boundary)
//   9..16  quadrature phases in PhaseFrame order

namespace gaitkit {

struct ModelConfig {
    int layers = 2;
    int heads = 2;
    int embed_dim = 32;
    int mlp_hidden = 64;
    double dropout_p = 0.1;
    double lr = 1e-3;
    double weight_decay = 0.0;  // decoupled, applied outside the Adam moments
    int epochs = 50;
    double consistency_weight = 1e-4;
    std::uint64_t seed = 0;
    // Batch-size buckets (max sequence length, batch size), ascending by
    // length; sequences longer than every bucket use the last batch size.
    std::vector<std::pair<int, int>> buckets = {{180, 16}, {400, 8}};

    // Full-size variant: 6 layers, 6 heads, 256 dim, 512 hidden, lr 1e-4,
    // 150 epochs, buckets 30 -> 128 and 300 -> 32.
    static ModelConfig full_scale();

    void validate() const;  // throws DataError
};

struct Linear {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;  // out
};

struct LayerNormParams {
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
};

struct EncoderLayerParams {
    LayerNormParams ln1, ln2;
    Linear wq, wk, wv, wo;      // attention projections, all D x D
    Linear ff1, ff2;            // feed-forward D -> H -> D
    Eigen::VectorXd scale1, scale2;  // per-channel layer-scale gains
};

struct ModelParams {
    ModelConfig config;
    Linear in1, in2;          // frame-input MLP, 30 -> D -> D
    Linear height1, height2;  // height MLP, 1 -> D -> D
    Eigen::VectorXd height_pos;  // learned position embedding of the height token
    std::vector<EncoderLayerParams> layers;
    LayerNormParams ln_final;
    Linear head;  // D -> 17
};

/// Seeded initialization: uniform fan-in scaled linear weights, layer-scale
/// gains at 1e-2, identity layer norms.
ModelParams init_params(const ModelConfig& cfg);

/// Same shapes as `like`, every tensor zero. Gradient container.
ModelParams zeros_like(const ModelParams& like);

/// Flat view over every learnable tensor, in a fixed canonical order.
struct TensorRef {
    std::string name;
    double* data;
    Eigen::Index rows, cols;

    Eigen::Index size() const { return rows * cols; }
};
std::vector<TensorRef> tensor_refs(ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

struct ModelOutput {
    Eigen::MatrixXd kinematics;  // T x 9, KinematicFrame order, degrees
    Eigen::MatrixXd phase_q;     // T x 8, PhaseFrame order
};

/// One trial prepared for the model: canonicalized inputs plus targets.
struct TrainExample {
    Eigen::MatrixXd pose_input;     // T x 30, canonical joints flattened x,y,z
    double height_m = 0;
    Eigen::MatrixXd kin_targets;    // T x 9, degrees (KinematicFrame order)
    Eigen::MatrixXd phase_targets;  // T x 8 quadrature targets
    Eigen::MatrixXd phase_weights;  // T x 4 per-event loss weights
    double dt = 0;
};

/// Canonicalizes the trial and encodes its ground truth; throws DataError if
/// gt_kinematics or gt_events is missing.
TrainExample make_example(const Trial& trial);

/// Frame vectors through the input MLP plus sinusoidal positions, with the
/// height token (height MLP + learned position) appended last: (T+1) x D.
Eigen::MatrixXd tokenize(const std::vector<CanonicalPose>& poses, double height_m,
                         const ModelParams& params);

/// Encoder stack plus 17-channel head over the frame positions. Dropout only
/// when train_mode, driven by dropout_seed. Throws NumericError naming the
/// layer on a non-finite activation.
ModelOutput forward(const ModelParams& params, const Eigen::MatrixXd& tokens,
                    bool train_mode = false, std::uint64_t dropout_seed = 0);

/// Physical-consistency error, one row per frame gap, columns (left, right):
/// e = (foot_vel - pelvis_vel) - (foot_pos[t+1] - foot_pos[t]) / dt, in m/s.
Eigen::MatrixXd consistency_error(const ModelOutput& out, double dt);

struct LossBreakdown {
    double total = 0;
    double kinematic = 0;    // mean squared error, radians/meters domain
    double phase = 0;        // weighted quadrature MSE, weight-normalized
    double consistency = 0;  // lambda * mean squared consistency error
};

LossBreakdown loss(const ModelOutput& out, const TrainExample& targets,
                   double consistency_weight);

/// Mean loss over the batch; exact gradients accumulated into `grads`
/// (overwritten). Deterministic given dropout_seed.
double loss_and_gradients(const ModelParams& params, const std::vector<TrainExample>& batch,
                          bool train_mode, std::uint64_t dropout_seed, ModelParams& grads);

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_trace;  // mean training loss per epoch
    int skipped_trials = 0;          // trials without targets
};

/// Adam (decoupled weight decay) over pad-free length-bucketed batches.
/// Bitwise-reproducible for a fixed cfg.seed. Throws NumericError naming the
/// epoch if the loss stops being finite.
TrainResult train(const std::vector<Trial>& dataset, const ModelConfig& cfg);

/// normalize -> tokenize -> forward in eval mode.
ModelOutput infer(const Trial& trial, const ModelParams& params);

struct Checkpoint {
    ModelParams params;
    int epochs_trained = 0;
};

/// JSON checkpoint with config, epoch count, and all tensors (names, shapes,
/// full-precision values). Loading rejects shape mismatches.
void save_checkpoint(const ModelParams& params, int epochs_trained,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gaitkit
