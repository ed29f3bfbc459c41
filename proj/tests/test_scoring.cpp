#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "autoseqrec/error.hpp"
#include "autoseqrec/scoring.hpp"

using namespace autoseqrec;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

ScoreVector sv(ScoreComponent c, std::initializer_list<double> xs) { return {c, vec(xs)}; }

RowMatrix rows(int r, int c, std::initializer_list<double> xs) {
  RowMatrix m(r, c);
  Eigen::Index i = 0;
  for (double x : xs) m(i / c, i % c) = x, ++i;
  return m;
}

ModelParams k1_params() {
  ModelParams p = init_params(2, 1, 1);
  p.weight(Head::collab) = Matrix(1, 2);
  p.weight(Head::collab) << 2, 4;
  p.bias(Head::collab) = vec({0, 1});
  p.weight(Head::source) = Matrix(1, 2);
  p.weight(Head::source) << 0.2, 0.8;
  p.bias(Head::source) = vec({0, 0});
  return p;
}

EmbeddingCache k1_cache() {
  return EmbeddingCache::from_tables(rows(1, 1, {0.5}), rows(2, 1, {2.0, 1.0}), rows(2, 1, {1.0, 3.0}));
}

// Index order of a brute-force stable sort by descending score.
std::vector<ItemIndex> argsort(const Vector& v) {
  std::vector<ItemIndex> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](ItemIndex a, ItemIndex b) { return v[a] > v[b]; });
  return idx;
}

}  // namespace

TEST_CASE("collaborative scores, k = 1") {
  auto p = k1_params();
  auto c = collaborative_scores(0, k1_cache(), p);
  CHECK(c.component == ScoreComponent::collab);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(3.0));

  auto zero = init_params(2, 1, 1);
  zero.weight(Head::collab).setZero();
  CHECK(collaborative_scores(0, k1_cache(), zero).values.isZero());
}

TEST_CASE("one-hop scores, k = 1") {
  auto p = k1_params();
  auto cache = EmbeddingCache::from_tables(rows(1, 1, {0.5}), rows(2, 1, {1.0, 1.0}), rows(2, 1, {1.0, 3.0}));
  auto s = one_hop_scores(0, cache, p);
  CHECK(s[0] == doctest::Approx(0.2));
  CHECK(s[1] == doctest::Approx(0.8));
  CHECK(one_hop_scores(1, cache, p).values == s.values);
}

TEST_CASE("two-hop and multi-hop scores, k = 1") {
  auto cache = k1_cache();
  auto t2 = two_hop_scores(0, 0, cache);
  CHECK(t2[0] == doctest::Approx(1.0));
  CHECK(t2[1] == doctest::Approx(3.0));
  CHECK(multi_hop_scores(0, 0, 2, cache).values == t2.values);

  auto t3 = multi_hop_scores(0, 0, 3, cache);
  CHECK(t3[0] == doctest::Approx(10.0));
  CHECK(t3[1] == doctest::Approx(30.0));

  auto dead = EmbeddingCache::from_tables(rows(1, 1, {0.0}), rows(2, 1, {2.0, 1.0}), rows(2, 1, {1.0, 3.0}));
  CHECK(two_hop_scores(0, 0, dead).values.isZero());
  auto flat = EmbeddingCache::from_tables(rows(1, 1, {0.5}), rows(2, 1, {2.0, 1.0}), rows(2, 1, {0.0, 0.0}));
  for (int h = 2; h < 6; ++h) CHECK(multi_hop_scores(0, 0, h, flat).values.isZero());
}

TEST_CASE("two-hop score is bilinear in the user and source embeddings") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    RowMatrix c = RowMatrix::Random(2, 4).cwiseAbs(), s = RowMatrix::Random(3, 4).cwiseAbs(),
              t = RowMatrix::Random(3, 4).cwiseAbs();
    const double a = u(rng) * 3, b = u(rng) * 3;
    auto base = EmbeddingCache::from_tables(c, s, t);
    RowMatrix c2 = c;
    c2.row(1) = a * c.row(0) + b * c.row(1);
    auto mixed = EmbeddingCache::from_tables(c2, s, t);
    Vector expect = a * two_hop_scores(0, 2, base).values + b * two_hop_scores(1, 2, base).values;
    CHECK((two_hop_scores(1, 2, mixed).values - expect).cwiseAbs().maxCoeff() < 1e-12);

    RowMatrix s2 = s;
    s2.row(0) = a * s.row(0);
    auto scaled = EmbeddingCache::from_tables(c, s2, t);
    CHECK((two_hop_scores(0, 0, scaled).values - a * two_hop_scores(0, 0, base).values).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("two-hop factor ablations replace one factor by ones") {
  RowMatrix c = rows(1, 2, {0.3, 0.6}), s = rows(2, 2, {0.3, 0.6, 0.0, 0.0}), t = rows(2, 2, {1, 2, 3, 4});
  auto cache = EmbeddingCache::from_tables(c, s, t);
  // Symmetric fixture: E_c row equals E_s row.
  CHECK(two_hop_scores(0, 0, cache, TwoHopFactors::source_only).values ==
        two_hop_scores(0, 0, cache, TwoHopFactors::collab_only).values);
  auto only_s = two_hop_scores(0, 0, cache, TwoHopFactors::source_only);
  // p = E_t [0.3, 0.6]
  CHECK(only_s[0] == doctest::Approx(1 * 0.3 + 2 * 0.6));
  CHECK(only_s[1] == doctest::Approx(3 * 0.3 + 4 * 0.6));
}

TEST_CASE("combine") {
  auto pc = sv(ScoreComponent::collab, {0, 2});
  auto p1 = sv(ScoreComponent::one_hop, {1, 1});
  auto p2 = sv(ScoreComponent::two_hop, {4, 0});
  InferenceConfig cfg;
  cfg.normalization = Normalization::none;
  cfg.lambda1 = 0.25;
  cfg.lambda2 = 0.25;
  auto p = combine(pc, p1, p2, cfg);
  CHECK(p.component == ScoreComponent::combined);
  CHECK(p[0] == doctest::Approx(2.25));
  CHECK(p[1] == doctest::Approx(0.75));

  cfg.lambda1 = 1;
  cfg.lambda2 = 0;
  CHECK(combine(pc, p1, p2, cfg).values == pc.values);

  cfg.lambda1 = 0;
  cfg.normalization = Normalization::minmax;
  auto only_t2 = combine(pc, p1, p2, cfg);
  CHECK(only_t2[0] == doctest::Approx(1.0));
  CHECK(only_t2[1] == doctest::Approx(0.0));
}

TEST_CASE("disabled components and weight renormalization") {
  InferenceConfig cfg;
  cfg.lambda1 = 0.2;
  cfg.lambda2 = 0.3;
  cfg.components = ComponentSet::parse("collab,one_hop");
  auto w = cfg.weights();
  CHECK(w[0] == doctest::Approx(0.4));
  CHECK(w[1] == doctest::Approx(0.6));
  CHECK(w[2] == 0.0);

  cfg.lambda1 = 0.0;
  cfg.components = ComponentSet::parse("collab");
  w = cfg.weights();
  CHECK(w[0] == doctest::Approx(1.0));

  cfg.components = ComponentSet::parse("all");
  CHECK(cfg.components.to_string() == "collab,one_hop,two_hop");
  CHECK_THROWS_AS(ComponentSet::parse("collab,bogus"), ConfigError);
}

TEST_CASE("lambda validation") {
  InferenceConfig cfg;
  cfg.lambda1 = 0.7;
  cfg.lambda2 = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambda1 = -0.1;
  cfg.lambda2 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambda1 = 0.7;
  cfg.lambda2 = 0.3;
  CHECK_NOTHROW(cfg.validate());
  cfg.hops = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(lambdas_admissible(0.1 * 7, 0.1 * 3));
  CHECK_FALSE(lambdas_admissible(0.7, 0.5));
}

TEST_CASE("rank_of and top_k examples") {
  CHECK(rank_of(vec({0.3, 0.9, 0.9}), 2) == 2);
  CHECK(rank_of(vec({0.3, 0.9, 0.9}), 1) == 1);
  CHECK(rank_of(vec({0.1, 0.2, 0.9}), 2) == 1);
  CHECK(rank_of(vec({0.5, 0.5, 0.5}), 0) == 1);
  CHECK(top_k(vec({0.1, 0.5, 0.5}), 2) == std::vector<ItemIndex>{1, 2});
  auto all = top_k(vec({0.4, 0.1, 0.9, 0.4}), 4);
  CHECK(all == std::vector<ItemIndex>{2, 0, 3, 1});
  CHECK_THROWS_AS(top_k(vec({1, 2}), 3), Error);
  CHECK_THROWS_AS(top_k(vec({1, 2}), 0), Error);
}

TEST_CASE("rank_of and top_k agree with a stable sort on random vectors") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 60);
    Vector v(n);
    // Coarse values force ties.
    for (int i = 0; i < n; ++i) v[i] = static_cast<double>(rng() % 7) / 7.0;
    const int k = 1 + static_cast<int>(rng() % n);
    auto order = argsort(v);
    auto top = top_k(v, k);
    REQUIRE(top == std::vector<ItemIndex>(order.begin(), order.begin() + k));
    for (int i = 0; i < n; ++i) {
      const auto pos = std::find(order.begin(), order.end(), i) - order.begin() + 1;
      REQUIRE(rank_of(v, i) == pos);
      const bool in_top = std::find(top.begin(), top.end(), i) != top.end();
      REQUIRE(in_top == (rank_of(v, i) <= k));
    }
  }
}

TEST_CASE("min-max normalization preserves order") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    Vector v = Vector::Random(1 + static_cast<int>(rng() % 40)) * 100.0;
    Vector w = v;
    minmax_normalize(w);
    CHECK(argsort(v) == argsort(w));
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.maxCoeff() <= 1.0);
  }
  Vector c = Vector::Constant(5, 3.0);
  minmax_normalize(c);
  CHECK(c.isZero());
}
