#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "autoseqrec/matrices.hpp"

namespace autoseqrec {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Decoder heads. Collab reconstructs rows of R, Source rows of T, Target rows of T^T.
enum class Head : int { collab = 0, source = 1, target = 2 };
inline constexpr std::array<Head, 3> kHeads = {Head::collab, Head::source, Head::target};
std::string_view head_name(Head head);

enum class DecoderActivation { identity, sigmoid };
enum class TransitionTransform { raw, log1p };

DecoderActivation parse_decoder_activation(std::string_view s);
std::string_view activation_name(DecoderActivation a);
TransitionTransform parse_transform(std::string_view s);
std::string_view transform_name(TransitionTransform t);

/// Count -> training/inference value for transition matrix entries.
inline double transform_count(std::uint32_t count, TransitionTransform t) {
  return t == TransitionTransform::log1p ? std::log1p(static_cast<double>(count)) : static_cast<double>(count);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Shared sigmoid encoder (n -> k) and three single-layer decoders (k -> n).
struct ModelParams {
  RowMatrix encoder_weight;  // n x k, row j is the contribution of item j
  Vector encoder_bias;       // k
  std::array<Matrix, 3> decoder_weight;  // k x n each, column j feeds item j
  std::array<Vector, 3> decoder_bias;    // n each
  DecoderActivation decoder_activation = DecoderActivation::identity;
  TransitionTransform transform = TransitionTransform::log1p;

  Eigen::Index num_items() const { return encoder_weight.rows(); }
  Eigen::Index hidden() const { return encoder_weight.cols(); }
  Matrix& weight(Head h) { return decoder_weight[static_cast<std::size_t>(h)]; }
  const Matrix& weight(Head h) const { return decoder_weight[static_cast<std::size_t>(h)]; }
  Vector& bias(Head h) { return decoder_bias[static_cast<std::size_t>(h)]; }
  const Vector& bias(Head h) const { return decoder_bias[static_cast<std::size_t>(h)]; }

  /// Throws if shapes disagree or any entry is non-finite.
  void validate() const;
};

ModelParams init_params(Eigen::Index num_items, Eigen::Index hidden, std::uint64_t seed,
                        DecoderActivation activation = DecoderActivation::identity,
                        TransitionTransform transform = TransitionTransform::log1p);

/// FNV-1a over the raw bytes of every parameter array.
std::uint64_t params_checksum(const ModelParams& params);

Matrix encode(const Matrix& inputs, const ModelParams& params);
Matrix decode(const Matrix& embeddings, Head head, const ModelParams& params);

/// Dense rows of the input matrix seen by `head`: R rows, Phi(T) rows or Phi(T) columns.
Matrix input_rows(const MatrixState& state, Head head, std::span<const std::int32_t> rows,
                  TransitionTransform transform);

struct ReconstructionLoss {
  double collab = 0.0;
  double source = 0.0;
  double target = 0.0;
  double total = 0.0;

  double& operator[](Head h) { return h == Head::collab ? collab : h == Head::source ? source : target; }
};

/// Squared Frobenius reconstruction losses of all three heads over the full matrices.
ReconstructionLoss reconstruction_loss(const MatrixState& state, const ModelParams& params);

struct HeadGradients {
  RowMatrix encoder_weight;
  Vector encoder_bias;
  Matrix decoder_weight;
  Vector decoder_bias;
};

/// ||X - g_head(f(X))||_F^2 for one batch, with gradients w.r.t. the encoder and that head's decoder.
double head_loss_and_gradients(const Matrix& inputs, Head head, const ModelParams& params,
                               HeadGradients* grads);

struct TrainConfig {
  Eigen::Index hidden = 128;
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 128;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  TransitionTransform transform = TransitionTransform::log1p;
  DecoderActivation decoder_activation = DecoderActivation::identity;
  // Early stopping on a caller-supplied validation score; 0 disables it.
  int early_stop_patience = 0;
  int eval_every = 5;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  ReconstructionLoss loss;
  double wall_ms = 0.0;
  std::optional<double> validation_score;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double wall_ms = 0.0;
};

using ValidationScorer = std::function<double(const ModelParams&)>;
using EpochObserver = std::function<void(const EpochLog&)>;

/// Mini-batch-union training: rows of R, Phi(T) and Phi(T)^T are batched per source,
/// the batches are shuffled together, and each batch steps the encoder plus its own head.
TrainResult train(const MatrixState& state, const TrainConfig& cfg, const ValidationScorer& scorer = {},
                  const EpochObserver& observer = {});

}  // namespace autoseqrec
