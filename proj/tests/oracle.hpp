#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "autoseqrec/incremental.hpp"

namespace testing {

struct OracleComparison {
  std::size_t events = 0;
  double max_abs_diff = 0.0;
  std::size_t rank_mismatches = 0;
};

// Replays `stream` on top of `history` through the incremental path and the full-rebuild path
// and compares every per-event score vector and rank.
inline OracleComparison compare_with_naive(const autoseqrec::InteractionLog& history,
                                           const autoseqrec::InteractionLog& stream,
                                           const autoseqrec::ModelParams& params,
                                           const autoseqrec::InferenceConfig& cfg) {
  using namespace autoseqrec;
  std::vector<Vector> fast_scores, slow_scores;
  auto keep = [](std::vector<Vector>& into) {
    return [&into](std::size_t, const Event&, const MatrixState&, const PredictionComponents&,
                   const ScoreVector& s) { into.push_back(s.values); };
  };
  MatrixState state = build_state(history);
  EmbeddingCache cache = warm_cache(state, params);
  auto fast = replay(stream, state, cache, params, cfg, keep(fast_scores));
  auto slow = naive_replay(history, stream, params, cfg, keep(slow_scores));

  OracleComparison out;
  out.events = fast.records.size();
  if (fast.records.size() != slow.records.size() || fast_scores.size() != slow_scores.size()) {
    out.rank_mismatches = std::max(fast.records.size(), slow.records.size());
    out.max_abs_diff = INFINITY;
    return out;
  }
  for (std::size_t e = 0; e < fast_scores.size(); ++e) {
    if (fast_scores[e].size() != slow_scores[e].size()) {
      out.max_abs_diff = INFINITY;
      continue;
    }
    for (Eigen::Index j = 0; j < fast_scores[e].size(); ++j) {
      const double a = fast_scores[e][j], b = slow_scores[e][j];
      if (a != b) out.max_abs_diff = std::max(out.max_abs_diff, std::abs(a - b));
    }
    if (fast.records[e].rank != slow.records[e].rank) ++out.rank_mismatches;
  }
  return out;
}

}  // namespace testing
