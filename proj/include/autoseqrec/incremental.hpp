#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "autoseqrec/embeddings.hpp"
#include "autoseqrec/matrices.hpp"
#include "autoseqrec/model.hpp"
#include "autoseqrec/scoring.hpp"

namespace autoseqrec {

EmbeddingCache warm_cache(const MatrixState& state, const ModelParams& params);

/// Raw (unnormalized) score components for one user. Components that were not requested are empty.
struct PredictionComponents {
  ScoreVector collab;
  ScoreVector one_hop;
  ScoreVector two_hop;
  std::optional<ItemIndex> last_item;
  bool fallback() const { return !last_item.has_value(); }
};

/// Computes the components `cfg` needs, or all three when `all` is set.
PredictionComponents compute_components(UserIndex u, const MatrixState& state, const EmbeddingCache& cache,
                                        const ModelParams& params, const InferenceConfig& cfg, bool all = false);

/// Final score vector from components: combine() for users with a last item, p_c alone otherwise.
/// Seen items are pushed to the bottom when cfg.filter_seen is set.
ScoreVector finalize_scores(UserIndex u, const PredictionComponents& parts, const MatrixState& state,
                            const InferenceConfig& cfg);

struct Prediction {
  ScoreVector scores;
  bool fallback = false;
};

Prediction predict_next(UserIndex u, const MatrixState& state, const EmbeddingCache& cache,
                        const ModelParams& params, const InferenceConfig& cfg);

struct ReplayRecord {
  std::size_t event_index = 0;
  UserIndex user = 0;
  ItemIndex item = 0;
  std::int64_t rank = 0;
  double reciprocal_rank = 0.0;
  bool hit = false;  // rank <= cfg.top_k
  double latency_us = 0.0;
  bool fallback = false;
};

/// Called after scoring and before the state update, once per event.
using StepObserver = std::function<void(std::size_t event_index, const Event& event, const MatrixState& state,
                                        const PredictionComponents& parts, const ScoreVector& scores)>;

/// Predict-then-update for one event: score the user's next item, record the rank of the true
/// item, then fold the true item into the state and refresh the touched cache rows.
/// Returns nothing when the event is skipped (cold user with cfg.skip_cold_users).
std::optional<ReplayRecord> step(MatrixState& state, EmbeddingCache& cache, const Event& event,
                                 std::size_t event_index, const ModelParams& params, const InferenceConfig& cfg,
                                 const StepObserver& observer = {});

struct LatencyStats {
  double mean_us = 0.0;
  double p50_us = 0.0;
  double p95_us = 0.0;
  double max_us = 0.0;
};

LatencyStats latency_stats(const std::vector<ReplayRecord>& records);

struct ReplayResult {
  std::vector<ReplayRecord> records;
  LatencyStats latency;
  std::size_t fallback_count = 0;
};

ReplayResult replay(const InteractionLog& stream, MatrixState& state, EmbeddingCache& cache,
                    const ModelParams& params, const InferenceConfig& cfg, const StepObserver& observer = {});

/// Reference path: before every event, rebuild the matrices from `history` plus the events already
/// replayed and recompute every embedding. No state is shared with the incremental path.
ReplayResult naive_replay(const InteractionLog& history, const InteractionLog& stream, const ModelParams& params,
                          const InferenceConfig& cfg, const StepObserver& observer = {},
                          bool count_self_transitions = true);

}  // namespace autoseqrec
