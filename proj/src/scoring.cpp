#include "autoseqrec/scoring.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

namespace {

constexpr double kLambdaSlack = 1e-9;

void check_user(UserIndex u, const EmbeddingCache& cache) {
  if (u < 0 || u >= cache.collab().rows()) throw Error("user index " + std::to_string(u) + " out of range");
}

void check_item(ItemIndex i, const EmbeddingCache& cache) {
  if (i < 0 || i >= cache.source().rows()) throw Error("item index " + std::to_string(i) + " out of range");
}

Vector decode_row(const RowMatrix& table, std::int32_t row, Head head, const ModelParams& params) {
  Vector y = params.bias(head);
  y.noalias() += params.weight(head).transpose() * table.row(row).transpose();
  if (params.decoder_activation == DecoderActivation::sigmoid) y = y.unaryExpr([](double x) { return sigmoid(x); });
  return y;
}

Vector personalized_embedding(UserIndex u, ItemIndex i, const EmbeddingCache& cache, TwoHopFactors factors) {
  check_user(u, cache);
  check_item(i, cache);
  switch (factors) {
    case TwoHopFactors::both:
      return cache.source().row(i).cwiseProduct(cache.collab().row(u)).transpose();
    case TwoHopFactors::source_only:
      return cache.source().row(i).transpose();
    case TwoHopFactors::collab_only:
      return cache.collab().row(u).transpose();
  }
  return {};
}

}  // namespace

Normalization parse_normalization(std::string_view s) {
  if (s == "none") return Normalization::none;
  if (s == "minmax") return Normalization::minmax;
  throw ConfigError("unknown normalization '" + std::string(s) + "' (expected none or minmax)");
}

std::string_view normalization_name(Normalization n) { return n == Normalization::none ? "none" : "minmax"; }

ComponentSet ComponentSet::parse(std::string_view csv) {
  ComponentSet set{false, false, false};
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto end = std::min(csv.find(',', start), csv.size());
    const auto tok = csv.substr(start, end - start);
    if (tok == "collab") set.collab = true;
    else if (tok == "one_hop") set.one_hop = true;
    else if (tok == "two_hop") set.two_hop = true;
    else if (tok == "all") set = ComponentSet{};
    else throw ConfigError("unknown score component '" + std::string(tok) + "' (expected collab, one_hop, two_hop)");
    start = end + 1;
  }
  return set;
}

std::string ComponentSet::to_string() const {
  std::vector<std::string> parts;
  if (collab) parts.emplace_back("collab");
  if (one_hop) parts.emplace_back("one_hop");
  if (two_hop) parts.emplace_back("two_hop");
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

bool lambdas_admissible(double lambda1, double lambda2) {
  return lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1 + lambda2 <= 1.0 + kLambdaSlack;
}

void InferenceConfig::validate() const {
  if (!lambdas_admissible(lambda1, lambda2)) {
    std::ostringstream msg;
    msg << "lambda1=" << lambda1 << ", lambda2=" << lambda2 << " violates lambda1, lambda2 >= 0 and lambda1 + lambda2 <= 1";
    throw ConfigError(msg.str());
  }
  if (hops < 2) throw ConfigError("hops must be >= 2");
  if (!components.any()) throw ConfigError("at least one score component must be enabled");
  if (top_k < 1) throw ConfigError("K must be >= 1");
}

std::array<double, 3> InferenceConfig::weights() const {
  std::array<double, 3> w = {lambda1, lambda2, std::max(0.0, 1.0 - lambda1 - lambda2)};
  const std::array<bool, 3> on = {components.collab, components.one_hop, components.two_hop};
  if (on[0] && on[1] && on[2]) return w;
  double sum = 0.0;
  int enabled = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    if (!on[c]) w[c] = 0.0;
    sum += w[c];
    enabled += on[c] ? 1 : 0;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (sum > 0.0) w[c] /= sum;
    else w[c] = on[c] ? 1.0 / enabled : 0.0;
  }
  return w;
}

ScoreVector collaborative_scores(UserIndex u, const EmbeddingCache& cache, const ModelParams& params) {
  check_user(u, cache);
  return {ScoreComponent::collab, decode_row(cache.collab(), u, Head::collab, params)};
}

ScoreVector one_hop_scores(ItemIndex i, const EmbeddingCache& cache, const ModelParams& params) {
  check_item(i, cache);
  return {ScoreComponent::one_hop, decode_row(cache.source(), i, Head::source, params)};
}

ScoreVector two_hop_scores(UserIndex u, ItemIndex i, const EmbeddingCache& cache, TwoHopFactors factors) {
  const Vector v = personalized_embedding(u, i, cache, factors);
  ScoreVector out{ScoreComponent::two_hop, Vector(cache.target().rows())};
  out.values.noalias() = cache.target() * v;
  return out;
}

ScoreVector multi_hop_scores(UserIndex u, ItemIndex i, int hops, const EmbeddingCache& cache, TwoHopFactors factors) {
  if (hops < 2) throw Error("multi-hop scoring needs hops >= 2");
  Vector v = personalized_embedding(u, i, cache, factors);
  Vector s(cache.target().rows());
  for (int hop = 2; hop <= hops; ++hop) {
    s.noalias() = cache.target() * v;
    if (hop < hops) v.noalias() = cache.target().transpose() * s;
  }
  return {ScoreComponent::two_hop, std::move(s)};
}

void minmax_normalize(Vector& v) {
  if (v.size() == 0) return;
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  if (!(hi > lo)) {
    v.setZero();
    return;
  }
  v = (v.array() - lo) / (hi - lo);
}

ScoreVector combine(const ScoreVector& collab, const ScoreVector& one_hop, const ScoreVector& two_hop,
                    const InferenceConfig& cfg) {
  cfg.validate();
  const auto w = cfg.weights();
  const std::array<const ScoreVector*, 3> parts = {&collab, &one_hop, &two_hop};
  Eigen::Index n = -1;
  for (std::size_t c = 0; c < 3; ++c) {
    if (w[c] == 0.0 && parts[c]->size() == 0) continue;
    if (n >= 0 && parts[c]->size() != n) throw Error("score components have different lengths");
    n = parts[c]->size();
  }
  if (n < 0) throw Error("combine needs at least one score component");
  ScoreVector out{ScoreComponent::combined, Vector::Zero(n)};
  for (std::size_t c = 0; c < 3; ++c) {
    if (w[c] == 0.0) continue;
    if (cfg.normalization == Normalization::minmax) {
      Vector v = parts[c]->values;
      minmax_normalize(v);
      out.values.noalias() += w[c] * v;
    } else {
      out.values.noalias() += w[c] * parts[c]->values;
    }
  }
  return out;
}

std::int64_t rank_of(const Vector& scores, ItemIndex target) {
  if (target < 0 || target >= scores.size()) throw Error("rank_of: target item out of range");
  const double t = scores[target];
  std::int64_t rank = 1;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    const double s = scores[j];
    if (s > t || (s == t && j < target)) ++rank;
  }
  return rank;
}

std::vector<ItemIndex> top_k(const Vector& scores, int k) {
  if (k < 1 || k > scores.size()) {
    throw Error("top_k: K=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  }
  std::vector<ItemIndex> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](ItemIndex a, ItemIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace autoseqrec
