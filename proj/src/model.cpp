#include "autoseqrec/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

namespace {

template <typename Derived>
std::uint64_t hash_array(std::uint64_t h, const Eigen::DenseBase<Derived>& a) {
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double v = a(r, c);
      const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
      for (std::size_t b = 0; b < sizeof(double); ++b) {
        h ^= bytes[b];
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

Eigen::Index rows_for(const MatrixState& state, Head head) {
  return head == Head::collab ? state.num_users() : state.num_items();
}

void apply_sigmoid(Matrix& m) {
  m = m.unaryExpr([](double x) { return sigmoid(x); });
}

// Adam moments for one parameter tensor.
template <typename M>
struct AdamSlot {
  M first;
  M second;
  long steps = 0;

  void init(const M& like) {
    first = M::Zero(like.rows(), like.cols());
    second = M::Zero(like.rows(), like.cols());
  }

  void step(M& param, const M& grad, const TrainConfig& cfg) {
    ++steps;
    first.array() = cfg.beta1 * first.array() + (1.0 - cfg.beta1) * grad.array();
    second.array() = cfg.beta2 * second.array() + (1.0 - cfg.beta2) * grad.array().square();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(steps));
    param.array() -= cfg.learning_rate * (first.array() / c1) / ((second.array() / c2).sqrt() + cfg.epsilon);
  }
};

struct Batch {
  Head head;
  std::vector<std::int32_t> rows;
};

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

std::string_view head_name(Head head) {
  switch (head) {
    case Head::collab: return "collab";
    case Head::source: return "source";
    case Head::target: return "target";
  }
  return "?";
}

DecoderActivation parse_decoder_activation(std::string_view s) {
  if (s == "identity") return DecoderActivation::identity;
  if (s == "sigmoid") return DecoderActivation::sigmoid;
  throw ConfigError("unknown decoder activation '" + std::string(s) + "'");
}

std::string_view activation_name(DecoderActivation a) {
  return a == DecoderActivation::identity ? "identity" : "sigmoid";
}

TransitionTransform parse_transform(std::string_view s) {
  if (s == "raw") return TransitionTransform::raw;
  if (s == "log1p") return TransitionTransform::log1p;
  throw ConfigError("unknown transition transform '" + std::string(s) + "'");
}

std::string_view transform_name(TransitionTransform t) {
  return t == TransitionTransform::raw ? "raw" : "log1p";
}

void ModelParams::validate() const {
  const auto n = num_items();
  const auto k = hidden();
  if (n < 1 || k < 1) throw Error("model dimensions must be positive");
  if (encoder_bias.size() != k) throw Error("encoder bias has wrong length");
  for (Head h : kHeads) {
    if (weight(h).rows() != k || weight(h).cols() != n || bias(h).size() != n) {
      throw Error("decoder '" + std::string(head_name(h)) + "' shape inconsistent with n=" + std::to_string(n) +
                  ", k=" + std::to_string(k));
    }
    if (!weight(h).allFinite() || !bias(h).allFinite()) {
      throw Error("decoder '" + std::string(head_name(h)) + "' has non-finite entries");
    }
  }
  if (!encoder_weight.allFinite() || !encoder_bias.allFinite()) throw Error("encoder has non-finite entries");
}

ModelParams init_params(Eigen::Index num_items, Eigen::Index hidden, std::uint64_t seed,
                        DecoderActivation activation, TransitionTransform transform) {
  if (num_items < 1 || hidden < 1) throw ConfigError("init_params needs n >= 1 and k >= 1");
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.decoder_activation = activation;
  p.transform = transform;
  const double enc_bound = 1.0 / std::sqrt(static_cast<double>(num_items));
  const double dec_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> enc(-enc_bound, enc_bound);
  std::uniform_real_distribution<double> dec(-dec_bound, dec_bound);
  p.encoder_weight.resize(num_items, hidden);
  for (Eigen::Index r = 0; r < num_items; ++r)
    for (Eigen::Index c = 0; c < hidden; ++c) p.encoder_weight(r, c) = enc(rng);
  p.encoder_bias = Vector::Zero(hidden);
  for (Head h : kHeads) {
    auto& w = p.weight(h);
    w.resize(hidden, num_items);
    for (Eigen::Index c = 0; c < num_items; ++c)
      for (Eigen::Index r = 0; r < hidden; ++r) w(r, c) = dec(rng);
    p.bias(h) = Vector::Zero(num_items);
  }
  return p;
}

std::uint64_t params_checksum(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = hash_array(h, params.encoder_weight);
  h = hash_array(h, params.encoder_bias);
  for (Head head : kHeads) {
    h = hash_array(h, params.weight(head));
    h = hash_array(h, params.bias(head));
  }
  return h;
}

Matrix encode(const Matrix& inputs, const ModelParams& params) {
  if (inputs.cols() != params.num_items()) {
    throw Error("encode: input width " + std::to_string(inputs.cols()) + " != n=" +
                std::to_string(params.num_items()));
  }
  Matrix z = inputs * params.encoder_weight;
  z.rowwise() += params.encoder_bias.transpose();
  apply_sigmoid(z);
  return z;
}

Matrix decode(const Matrix& embeddings, Head head, const ModelParams& params) {
  if (embeddings.cols() != params.hidden()) {
    throw Error("decode: embedding width " + std::to_string(embeddings.cols()) + " != k=" +
                std::to_string(params.hidden()));
  }
  Matrix y = embeddings * params.weight(head);
  y.rowwise() += params.bias(head).transpose();
  if (params.decoder_activation == DecoderActivation::sigmoid) apply_sigmoid(y);
  return y;
}

Matrix input_rows(const MatrixState& state, Head head, std::span<const std::int32_t> rows,
                  TransitionTransform transform) {
  const Eigen::Index n = state.num_items();
  Matrix x(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto r = rows[b];
    const auto br = static_cast<Eigen::Index>(b);
    switch (head) {
      case Head::collab: {
        const auto row = state.interaction_row(r);
        for (Eigen::Index j = 0; j < n; ++j) x(br, j) = row[static_cast<std::size_t>(j)];
        break;
      }
      case Head::source: {
        const auto row = state.transition_row(r);
        for (Eigen::Index j = 0; j < n; ++j) x(br, j) = transform_count(row[static_cast<std::size_t>(j)], transform);
        break;
      }
      case Head::target:
        for (Eigen::Index j = 0; j < n; ++j)
          x(br, j) = transform_count(state.transition(static_cast<ItemIndex>(j), r), transform);
        break;
    }
  }
  return x;
}

ReconstructionLoss reconstruction_loss(const MatrixState& state, const ModelParams& params) {
  ReconstructionLoss loss;
  constexpr std::int32_t kChunk = 256;
  for (Head head : kHeads) {
    const auto total_rows = static_cast<std::int32_t>(rows_for(state, head));
    double acc = 0.0;
    std::vector<std::int32_t> rows;
    for (std::int32_t begin = 0; begin < total_rows; begin += kChunk) {
      rows.resize(static_cast<std::size_t>(std::min(kChunk, total_rows - begin)));
      std::iota(rows.begin(), rows.end(), begin);
      const Matrix x = input_rows(state, head, rows, params.transform);
      acc += (decode(encode(x, params), head, params) - x).squaredNorm();
    }
    loss[head] = acc;
  }
  loss.total = loss.collab + loss.source + loss.target;
  return loss;
}

double head_loss_and_gradients(const Matrix& inputs, Head head, const ModelParams& params, HeadGradients* grads) {
  const Matrix hidden = encode(inputs, params);
  Matrix out = hidden * params.weight(head);
  out.rowwise() += params.bias(head).transpose();
  if (params.decoder_activation == DecoderActivation::sigmoid) apply_sigmoid(out);
  Matrix residual = out - inputs;
  const double loss = residual.squaredNorm();
  if (grads == nullptr) return loss;

  // d loss / d pre-activation of the decoder
  Matrix d_out = 2.0 * residual;
  if (params.decoder_activation == DecoderActivation::sigmoid) {
    d_out.array() *= out.array() * (1.0 - out.array());
  }
  grads->decoder_weight.noalias() = hidden.transpose() * d_out;
  grads->decoder_bias = d_out.colwise().sum().transpose();
  Matrix d_hidden = d_out * params.weight(head).transpose();
  d_hidden.array() *= hidden.array() * (1.0 - hidden.array());
  grads->encoder_weight.noalias() = inputs.transpose() * d_hidden;
  grads->encoder_bias = d_hidden.colwise().sum().transpose();
  return loss;
}

void TrainConfig::validate() const {
  if (hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("moment decays must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (early_stop_patience < 0 || eval_every < 1) throw ConfigError("invalid early-stopping settings");
}

TrainResult train(const MatrixState& state, const TrainConfig& cfg, const ValidationScorer& scorer,
                  const EpochObserver& observer) {
  cfg.validate();
  if (state.num_items() < 1) throw Error("cannot train on a state with no items");
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  result.params = init_params(state.num_items(), cfg.hidden, cfg.seed, cfg.decoder_activation, cfg.transform);
  ModelParams& params = result.params;

  AdamSlot<RowMatrix> enc_w;
  AdamSlot<Vector> enc_b;
  std::array<AdamSlot<Matrix>, 3> dec_w;
  std::array<AdamSlot<Vector>, 3> dec_b;
  enc_w.init(params.encoder_weight);
  enc_b.init(params.encoder_bias);
  for (Head h : kHeads) {
    dec_w[static_cast<std::size_t>(h)].init(params.weight(h));
    dec_b[static_cast<std::size_t>(h)].init(params.bias(h));
  }

  // Separate stream for shuffling so initialization stays a pure function of the seed.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::array<std::vector<std::int32_t>, 3> order;
  for (Head h : kHeads) {
    auto& o = order[static_cast<std::size_t>(h)];
    o.resize(static_cast<std::size_t>(rows_for(state, h)));
    std::iota(o.begin(), o.end(), 0);
  }

  std::optional<double> best_score;
  ModelParams best_params;
  int evals_without_improvement = 0;
  HeadGradients grads;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::vector<Batch> batches;
    for (Head h : kHeads) {
      auto& o = order[static_cast<std::size_t>(h)];
      std::shuffle(o.begin(), o.end(), rng);
      for (std::size_t b = 0; b < o.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
        const auto e = std::min(o.size(), b + static_cast<std::size_t>(cfg.batch_size));
        batches.push_back(Batch{h, std::vector<std::int32_t>(o.begin() + static_cast<std::ptrdiff_t>(b),
                                                             o.begin() + static_cast<std::ptrdiff_t>(e))});
      }
    }
    std::shuffle(batches.begin(), batches.end(), rng);

    EpochLog log;
    log.epoch = epoch;
    for (const auto& batch : batches) {
      const Matrix x = input_rows(state, batch.head, batch.rows, cfg.transform);
      const double loss = head_loss_and_gradients(x, batch.head, params, &grads);
      if (!std::isfinite(loss)) {
        throw Error("training diverged: non-finite " + std::string(head_name(batch.head)) + " loss at epoch " +
                    std::to_string(epoch) + " (learning rate " + std::to_string(cfg.learning_rate) + " too high?)");
      }
      log.loss[batch.head] += loss;
      const auto hi = static_cast<std::size_t>(batch.head);
      enc_w.step(params.encoder_weight, grads.encoder_weight, cfg);
      enc_b.step(params.encoder_bias, grads.encoder_bias, cfg);
      dec_w[hi].step(params.weight(batch.head), grads.decoder_weight, cfg);
      dec_b[hi].step(params.bias(batch.head), grads.decoder_bias, cfg);
    }
    log.loss.total = log.loss.collab + log.loss.source + log.loss.target;

    const bool evaluate = scorer && cfg.early_stop_patience > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    if (evaluate) {
      const double score = scorer(params);
      log.validation_score = score;
      if (!best_score || score > *best_score) {
        best_score = score;
        best_params = params;
        result.best_epoch = epoch;
        evals_without_improvement = 0;
      } else {
        ++evals_without_improvement;
      }
    }
    log.wall_ms = elapsed_ms(epoch_start);
    result.epochs.push_back(log);
    if (observer) observer(log);
    if (evaluate && evals_without_improvement >= cfg.early_stop_patience) break;
  }

  if (best_score) {
    params = std::move(best_params);
  } else {
    result.best_epoch = cfg.epochs;
  }
  result.wall_ms = elapsed_ms(start);
  return result;
}

}  // namespace autoseqrec
