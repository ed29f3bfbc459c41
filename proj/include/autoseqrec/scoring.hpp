#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "autoseqrec/embeddings.hpp"
#include "autoseqrec/model.hpp"

namespace autoseqrec {

enum class ScoreComponent { collab, one_hop, two_hop, combined };

struct ScoreVector {
  ScoreComponent component = ScoreComponent::combined;
  Vector values;

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
};

enum class Normalization { none, minmax };
Normalization parse_normalization(std::string_view s);
std::string_view normalization_name(Normalization n);

/// Which encoder factors form the personalized transition embedding of the two-hop score.
/// `source_only` replaces the collab factor by ones, `collab_only` the source factor.
enum class TwoHopFactors { both, source_only, collab_only };

struct ComponentSet {
  bool collab = true;
  bool one_hop = true;
  bool two_hop = true;

  static ComponentSet parse(std::string_view csv);
  std::string to_string() const;
  bool any() const { return collab || one_hop || two_hop; }
  friend bool operator==(const ComponentSet&, const ComponentSet&) = default;
};

struct InferenceConfig {
  double lambda1 = 0.5;
  double lambda2 = 0.3;
  int hops = 2;
  Normalization normalization = Normalization::minmax;
  ComponentSet components;
  TwoHopFactors two_hop_factors = TwoHopFactors::both;
  bool filter_seen = true;
  // Cold users (no previous item): score with p_c alone, or drop the event when set.
  bool skip_cold_users = false;
  int top_k = 10;

  /// Throws ConfigError when the lambda constraints or other ranges are violated.
  void validate() const;
  /// Effective (collab, one_hop, two_hop) weights after disabling components.
  std::array<double, 3> weights() const;
};

/// lambda1, lambda2 >= 0 and lambda1 + lambda2 <= 1, with a small slack for decimal grids.
bool lambdas_admissible(double lambda1, double lambda2);

ScoreVector collaborative_scores(UserIndex u, const EmbeddingCache& cache, const ModelParams& params);
ScoreVector one_hop_scores(ItemIndex i, const EmbeddingCache& cache, const ModelParams& params);
ScoreVector two_hop_scores(UserIndex u, ItemIndex i, const EmbeddingCache& cache,
                           TwoHopFactors factors = TwoHopFactors::both);
/// h-hop generalization: repeatedly project through the target table. h = 2 equals two_hop_scores.
ScoreVector multi_hop_scores(UserIndex u, ItemIndex i, int hops, const EmbeddingCache& cache,
                             TwoHopFactors factors = TwoHopFactors::both);

/// In-place min-max scaling to [0, 1]; a constant vector becomes all zeros.
void minmax_normalize(Vector& v);

ScoreVector combine(const ScoreVector& collab, const ScoreVector& one_hop, const ScoreVector& two_hop,
                    const InferenceConfig& cfg);

/// 1 + #{j : p[j] > p[t]} + #{j < t : p[j] == p[t]}.
std::int64_t rank_of(const Vector& scores, ItemIndex target);
inline std::int64_t rank_of(const ScoreVector& p, ItemIndex target) { return rank_of(p.values, target); }

/// K best items by descending score, ties by ascending index.
std::vector<ItemIndex> top_k(const Vector& scores, int k);
inline std::vector<ItemIndex> top_k(const ScoreVector& p, int k) { return top_k(p.values, k); }

}  // namespace autoseqrec
