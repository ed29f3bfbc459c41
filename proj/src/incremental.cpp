#include "autoseqrec/incremental.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

ReplayRecord make_record(std::size_t index, const Event& e, const Prediction& p, const InferenceConfig& cfg) {
  ReplayRecord r;
  r.event_index = index;
  r.user = e.user;
  r.item = e.item;
  r.rank = rank_of(p.scores, e.item);
  r.reciprocal_rank = 1.0 / static_cast<double>(r.rank);
  r.hit = r.rank <= cfg.top_k;
  r.fallback = p.fallback;
  return r;
}

}  // namespace

EmbeddingCache warm_cache(const MatrixState& state, const ModelParams& params) {
  EmbeddingCache cache;
  cache.warm(state, params);
  return cache;
}

PredictionComponents compute_components(UserIndex u, const MatrixState& state, const EmbeddingCache& cache,
                                        const ModelParams& params, const InferenceConfig& cfg, bool all) {
  if (u < 0 || u >= state.num_users()) throw Error("user index " + std::to_string(u) + " out of range");
  PredictionComponents parts;
  parts.last_item = state.last_item(u);
  const auto w = cfg.weights();
  if (all || w[0] != 0.0 || !parts.last_item) parts.collab = collaborative_scores(u, cache, params);
  if (!parts.last_item) return parts;
  const ItemIndex last = *parts.last_item;
  if (all || w[1] != 0.0) parts.one_hop = one_hop_scores(last, cache, params);
  if (all || w[2] != 0.0) {
    parts.two_hop = cfg.hops == 2 ? two_hop_scores(u, last, cache, cfg.two_hop_factors)
                                  : multi_hop_scores(u, last, cfg.hops, cache, cfg.two_hop_factors);
  }
  return parts;
}

ScoreVector finalize_scores(UserIndex u, const PredictionComponents& parts, const MatrixState& state,
                            const InferenceConfig& cfg) {
  ScoreVector out;
  if (parts.fallback()) {
    out = ScoreVector{ScoreComponent::combined, parts.collab.values};
    if (cfg.normalization == Normalization::minmax) minmax_normalize(out.values);
  } else {
    out = combine(parts.collab, parts.one_hop, parts.two_hop, cfg);
  }
  if (cfg.filter_seen) {
    const auto row = state.interaction_row(u);
    for (Eigen::Index j = 0; j < out.size(); ++j) {
      if (row[static_cast<std::size_t>(j)] != 0) out.values[j] = std::numeric_limits<double>::lowest();
    }
  }
  return out;
}

Prediction predict_next(UserIndex u, const MatrixState& state, const EmbeddingCache& cache,
                        const ModelParams& params, const InferenceConfig& cfg) {
  const auto parts = compute_components(u, state, cache, params, cfg);
  return {finalize_scores(u, parts, state, cfg), parts.fallback()};
}

std::optional<ReplayRecord> step(MatrixState& state, EmbeddingCache& cache, const Event& event,
                                 std::size_t event_index, const ModelParams& params, const InferenceConfig& cfg,
                                 const StepObserver& observer) {
  const auto t0 = Clock::now();
  std::optional<ReplayRecord> record;
  double observer_us = 0.0;
  const bool cold = !state.last_item(event.user).has_value();
  if (!(cold && cfg.skip_cold_users)) {
    const auto parts = compute_components(event.user, state, cache, params, cfg, static_cast<bool>(observer));
    Prediction p{finalize_scores(event.user, parts, state, cfg), parts.fallback()};
    record = make_record(event_index, event, p, cfg);
    if (observer) {
      const auto t_obs = Clock::now();
      observer(event_index, event, state, parts, p.scores);
      observer_us = micros_since(t_obs);
    }
  }
  cache.mark_dirty(state.apply_interaction(event.user, event.item));
  cache.refresh(state, params);
  if (record) record->latency_us = micros_since(t0) - observer_us;
  return record;
}

LatencyStats latency_stats(const std::vector<ReplayRecord>& records) {
  LatencyStats s;
  if (records.empty()) return s;
  std::vector<double> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.latency_us);
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean_us = sum / static_cast<double>(v.size());
  auto pct = [&](double q) {
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1) + 0.5);
    return v[std::min(idx, v.size() - 1)];
  };
  s.p50_us = pct(0.5);
  s.p95_us = pct(0.95);
  s.max_us = v.back();
  return s;
}

ReplayResult replay(const InteractionLog& stream, MatrixState& state, EmbeddingCache& cache,
                    const ModelParams& params, const InferenceConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  if (!cache.is_clean()) cache.refresh(state, params);
  ReplayResult result;
  result.records.reserve(stream.size());
  for (std::size_t idx = 0; idx < stream.size(); ++idx) {
    auto rec = step(state, cache, stream.events[idx], idx, params, cfg, observer);
    if (rec) {
      result.fallback_count += rec->fallback ? 1 : 0;
      result.records.push_back(*rec);
    }
  }
  result.latency = latency_stats(result.records);
  return result;
}

ReplayResult naive_replay(const InteractionLog& history, const InteractionLog& stream, const ModelParams& params,
                          const InferenceConfig& cfg, const StepObserver& observer, bool count_self_transitions) {
  cfg.validate();
  InteractionLog seen = history;
  seen.num_users = stream.num_users;
  seen.num_items = stream.num_items;
  ReplayResult result;
  for (std::size_t idx = 0; idx < stream.size(); ++idx) {
    const Event& e = stream.events[idx];
    const auto t0 = Clock::now();
    const MatrixState state = build_state(seen, count_self_transitions);
    const EmbeddingCache cache = warm_cache(state, params);
    const bool cold = !state.last_item(e.user).has_value();
    if (!(cold && cfg.skip_cold_users)) {
      const auto parts = compute_components(e.user, state, cache, params, cfg, static_cast<bool>(observer));
      Prediction p{finalize_scores(e.user, parts, state, cfg), parts.fallback()};
      ReplayRecord rec = make_record(idx, e, p, cfg);
      rec.latency_us = micros_since(t0);
      if (observer) observer(idx, e, state, parts, p.scores);
      result.fallback_count += rec.fallback ? 1 : 0;
      result.records.push_back(rec);
    }
    seen.events.push_back(e);
  }
  result.latency = latency_stats(result.records);
  return result;
}

}  // namespace autoseqrec
