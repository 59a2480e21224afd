#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsfract/errors.hpp"
#include "tsfract/metrics.hpp"

namespace tsfract {

struct HgnnConfig {
  int fusion_dim = 64;   // d_f: per-layer feature width; even, = 2*hidden = filters
  int kernel_size = 3;   // convolution width
  int num_classes = 5;
  std::uint64_t seed = 0;

  int hidden_dim() const noexcept { return fusion_dim / 2; }
  void validate() const;
};

/// One LSTM direction. Gate order everywhere: forget, input, candidate,
/// output. Input and recurrent weights are separate matrices.
struct LstmDirParams {
  std::array<Eigen::MatrixXd, 4> w;  // hidden x input_dim
  std::array<Eigen::MatrixXd, 4> u;  // hidden x hidden
  std::array<Eigen::VectorXd, 4> b;  // hidden
};

struct BiLstmParams {
  LstmDirParams fwd;
  LstmDirParams bwd;
};

struct ConvParams {
  Eigen::MatrixXd kernels;  // filters x kernel_size
  Eigen::VectorXd bias;     // filters
};

struct FusionParams {
  Eigen::MatrixXd w_ctx;  // d_f x d_f, screening of the context feature
  Eigen::VectorXd b_ctx;
  Eigen::MatrixXd w_loc;  // d_f x d_f, screening of the local feature
  Eigen::VectorXd b_loc;
};

/// All trainable state. Layers 1-3 fuse through gating; layer 4 concatenates,
/// so it has no fusion block. Block order (checkpoints, Adam state, flat
/// indexing) is the order visited by blocks():
///   per layer 0..3: fwd then bwd direction, per gate f,i,g,o: w, u, b;
///   per layer 0..3: conv kernels (column-major), conv bias;
///   per fusion layer 0..2: w_ctx, b_ctx, w_loc, b_loc;
///   fc weights (column-major), fc bias.
struct HgnnParams {
  std::array<BiLstmParams, 4> lstm;
  std::array<ConvParams, 4> conv;
  std::array<FusionParams, 3> fusion;
  Eigen::MatrixXd fc_w;  // num_classes x 2*d_f
  Eigen::VectorXd fc_b;

  static HgnnParams zeros(const HgnnConfig& config);
  /// Seeded uniform init in +-1/sqrt(fan_in) per block.
  static HgnnParams init(const HgnnConfig& config);

  std::vector<std::pair<double*, std::size_t>> blocks();
  std::vector<std::pair<const double*, std::size_t>> blocks() const;
  std::size_t param_count() const;

  void set_zero();
  void axpy(double scale, const HgnnParams& other);  // *this += scale * other

  double get_flat(std::size_t index) const;
  void set_flat(std::size_t index, double value);
};

std::vector<double> flatten(const HgnnParams& params);
HgnnParams unflatten(const HgnnConfig& config, std::span<const double> flat);

struct LstmDirTrace {
  Eigen::MatrixXd f, i, g, o, c, h;  // hidden x steps, processing order
};

struct BiLstmTrace {
  LstmDirTrace fwd, bwd;
  Eigen::VectorXd out;  // [final fwd state; final bwd state]
};

struct ConvTrace {
  std::vector<int> argmax;  // winning position per filter, -1 if pooled to 0
  Eigen::VectorXd out;
};

struct FusionTrace {
  Eigen::VectorXd lambda, eta, psi, out;
};

/// Every intermediate of one forward pass, enough to backpropagate.
struct ForwardTrace {
  Eigen::VectorXd input;
  std::array<Eigen::VectorXd, 4> lstm_in;  // sequence fed to each BiLSTM
  std::array<Eigen::VectorXd, 4> conv_in;  // sequence fed to each CNN
  std::array<BiLstmTrace, 4> ctx;
  std::array<ConvTrace, 4> loc;
  std::array<FusionTrace, 3> fused;
  Eigen::VectorXd fused4;  // concat of layer-4 context and local features
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

/// One LSTM step: gates from W x + U h_prev + b, new cell and hidden state.
std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_cell_step(
    const LstmDirParams& params, const Eigen::VectorXd& x,
    const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev);

/// Concatenation of the final forward and final backward hidden states over
/// a scalar sequence.
Eigen::VectorXd bilstm_encode(const BiLstmParams& params,
                              std::span<const double> sequence);

/// ReLU feature map per filter over all kernel positions, max-pooled.
Eigen::VectorXd conv_maxpool(const ConvParams& params,
                             std::span<const double> sequence);

/// Gating weight psi = eta * (1 - (1 - lambda)^2) + (1 - eta) * lambda.
/// Lies in [0, 1] for lambda, eta in [0, 1]; psi -> lambda as eta -> 0.
double fusion_weight(double lambda, double eta);

/// Elementwise blend (1 - psi) * context + psi * local.
Eigen::VectorXd fuse_with_weights(const Eigen::VectorXd& context,
                                  const Eigen::VectorXd& local,
                                  const Eigen::VectorXd& psi);

/// Full gated fusion: screening coefficients from learned projections, then
/// the blend above.
Eigen::VectorXd fuse(const FusionParams& params, const Eigen::VectorXd& context,
                     const Eigen::VectorXd& local);

/// Four-layer hierarchy. Layer k feeds fusion outputs of earlier layers back
/// in as 1-channel scalar sequences; layer 4 concatenates instead of fusing;
/// a linear head plus softmax produces the class distribution.
ForwardTrace hgnn_forward(const Eigen::VectorXd& features,
                          const HgnnParams& params, const HgnnConfig& config);

/// Argmax class as a 1-indexed level; ties break to the lowest index.
int predict(const ForwardTrace& trace);

/// Negative log-likelihood of the 0-based label.
double cross_entropy(const ForwardTrace& trace, int label);

/// Accumulates exact gradients of cross_entropy into grad (same shape as the
/// parameters; call grad.set_zero() first for a fresh gradient).
void hgnn_backward(const HgnnParams& params, const HgnnConfig& config,
                   const ForwardTrace& trace, int label, HgnnParams& grad);

struct Sample {
  Eigen::VectorXd features;
  int label = 0;  // 0-based
};

struct TrainSchedule {
  double lr = 1e-5;
  int epochs = 50;
  int batch = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainHistory {
  std::vector<double> train_loss;    // per epoch, mean over samples
  std::vector<double> val_macro_f1;  // per epoch
  int best_epoch = -1;               // 0-based epoch of the returned params
};

struct TrainResult {
  HgnnParams params;
  TrainHistory history;
};

/// Minibatch Adam on softmax cross-entropy. Gradients accumulate over
/// fixed-size sample chunks that are summed in chunk order, so the result is
/// bit-identical for any OpenMP thread count. Returns the parameters of the
/// best validation epoch (final epoch when no validation set is given).
TrainResult train(std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const HgnnConfig& config,
                  const TrainSchedule& schedule);

/// Predictions for every sample (parallel, order-stable) -> confusion matrix.
ConfusionMatrix hgnn_confusion(std::span<const Sample> samples,
                               const HgnnParams& params,
                               const HgnnConfig& config);

double mean_loss(std::span<const Sample> samples, const HgnnParams& params,
                 const HgnnConfig& config);

}  // namespace tsfract
