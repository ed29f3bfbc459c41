#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "autoseqrec/error.hpp"
#include "autoseqrec/model.hpp"
#include "gradcheck.hpp"
#include "test_support.hpp"

using namespace autoseqrec;

namespace {

ModelParams zero_params(int n, int k) {
  ModelParams p = init_params(n, k, 1);
  p.encoder_weight.setZero();
  for (auto& w : p.decoder_weight) w.setZero();
  return p;
}

MatrixState tiny_state() {
  InteractionLog log;
  log.num_users = 4;
  log.num_items = 4;
  const int seq[][2] = {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}, {3, 0}, {0, 2}, {1, 3}, {2, 0}};
  std::int64_t t = 0;
  for (auto [u, i] : seq) log.events.push_back({u, i, t, t}), ++t;
  return build_state(log);
}

}  // namespace

TEST_CASE("init_params bounds, zero biases, determinism") {
  auto a = init_params(4, 2, 1);
  auto b = init_params(4, 2, 1);
  CHECK(params_checksum(a) == params_checksum(b));
  CHECK(a.encoder_weight.cwiseAbs().maxCoeff() <= 0.5);
  CHECK(a.weight(Head::source).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(2.0));
  CHECK(a.encoder_bias.isZero());
  for (auto h : kHeads) CHECK(a.bias(h).isZero());
  CHECK(params_checksum(init_params(4, 2, 2)) != params_checksum(a));
}

TEST_CASE("encode examples") {
  auto p = zero_params(3, 2);
  Matrix x = Matrix::Random(4, 3);
  CHECK((encode(x, p).array() == 0.5).all());

  ModelParams q = zero_params(2, 1);
  q.encoder_weight << 2, -1;
  q.encoder_bias << -1;
  Matrix one(1, 2);
  one << 1, 0;
  CHECK(encode(one, q)(0, 0) == doctest::Approx(0.7310586).epsilon(1e-7));

  Matrix twin(2, 2);
  twin << 0.3, 1.7, 0.3, 1.7;
  auto e = encode(twin, q);
  CHECK(e.row(0) == e.row(1));
}

TEST_CASE("encoder output stays in (0, 1)") {
  auto p = init_params(6, 3, 7);
  Matrix x = Matrix::Random(20, 6) * 5.0;
  auto e = encode(x, p);
  CHECK((e.array() > 0.0).all());
  CHECK((e.array() < 1.0).all());
}

TEST_CASE("decode examples") {
  auto p = zero_params(2, 2);
  Matrix e(1, 2);
  e << 1, 1;
  CHECK(decode(e, Head::source, p).isZero());

  p.weight(Head::source) << 1, 0, 0, 2;
  p.bias(Head::source) << 0.5, 0.5;
  auto out = decode(e, Head::source, p);
  CHECK(out(0, 0) == doctest::Approx(1.5));
  CHECK(out(0, 1) == doctest::Approx(2.5));

  p.decoder_activation = DecoderActivation::sigmoid;
  out = decode(e, Head::source, p);
  CHECK(out(0, 0) == doctest::Approx(0.8175745).epsilon(1e-7));
  CHECK(out(0, 1) == doctest::Approx(0.9241418).epsilon(1e-7));
}

TEST_CASE("transition transform") {
  CHECK(transform_count(3, TransitionTransform::log1p) == doctest::Approx(1.3862944).epsilon(1e-7));
  CHECK(transform_count(3, TransitionTransform::raw) == 3.0);

  MatrixState s(1, 2);
  for (int r = 0; r < 6; ++r) s.apply_interaction(0, r % 2);
  REQUIRE(s.transition(0, 1) == 3);
  std::vector<std::int32_t> rows{0};
  auto src = input_rows(s, Head::source, rows, TransitionTransform::log1p);
  CHECK(src(0, 1) == doctest::Approx(std::log(4.0)));
  std::vector<std::int32_t> cols{1};
  auto tgt = input_rows(s, Head::target, cols, TransitionTransform::log1p);
  CHECK(tgt(0, 0) == doctest::Approx(std::log(4.0)));
  CHECK(tgt(0, 1) == 0.0);
}

TEST_CASE("reconstruction loss examples and additivity") {
  MatrixState s(1, 3);
  s.apply_interaction(0, 0);
  auto p = zero_params(3, 2);
  // Decoder C outputs exactly R except one entry, off by 1.
  p.bias(Head::collab) << 1, 1, 0;
  auto loss = reconstruction_loss(s, p);
  CHECK(loss.collab == doctest::Approx(1.0));
  CHECK(loss.source == 0.0);
  CHECK(loss.target == 0.0);
  CHECK(loss.total == loss.collab + loss.source + loss.target);

  p.bias(Head::collab) << 1, 0, 0;
  CHECK(reconstruction_loss(s, p).total == 0.0);

  auto t = tiny_state();
  auto q = init_params(4, 3, 5);
  auto l = reconstruction_loss(t, q);
  CHECK(l.total == l.collab + l.source + l.target);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i) {
    auto act = i % 2 == 0 ? DecoderActivation::identity : DecoderActivation::sigmoid;
    auto inst = testing::random_grad_instance(rng, i, act);
    auto r = testing::check_head_gradients(inst.x, inst.head, inst.params);
    INFO("instance " << i << " head " << head_name(inst.head));
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("every head writes into the shared encoder") {
  std::mt19937_64 rng(1);
  auto p = init_params(5, 3, 4);
  Matrix x = Matrix::Random(3, 5).cwiseAbs();
  for (auto h : kHeads) {
    HeadGradients g;
    head_loss_and_gradients(x, h, p, &g);
    CHECK(g.encoder_weight.cwiseAbs().maxCoeff() > 0.0);
    CHECK(g.encoder_bias.cwiseAbs().maxCoeff() > 0.0);
  }

  TrainConfig cfg;
  cfg.hidden = 3;
  cfg.epochs = 1;
  cfg.batch_size = 2;
  auto s = tiny_state();
  auto before = init_params(4, 3, cfg.seed);
  auto after = train(s, cfg).params;
  CHECK((after.encoder_weight - before.encoder_weight).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training decreases loss and is deterministic") {
  auto s = tiny_state();
  TrainConfig cfg;
  cfg.hidden = 2;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 2;
  cfg.seed = 3;
  auto init = init_params(4, 2, cfg.seed);
  auto a = train(s, cfg);
  auto b = train(s, cfg);
  CHECK(reconstruction_loss(s, a.params).total < reconstruction_loss(s, init).total);
  CHECK(a.epochs.size() == 50);
  CHECK(a.epochs.back().loss.total < a.epochs.front().loss.total);
  CHECK(params_checksum(a.params) == params_checksum(b.params));
}

TEST_CASE("diverging learning rate aborts") {
  auto s = tiny_state();
  TrainConfig cfg;
  cfg.hidden = 2;
  cfg.epochs = 5;
  cfg.learning_rate = 1e300;
  CHECK_THROWS_AS(train(s, cfg), Error);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.hidden = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_transform("sqrt"), ConfigError);
  CHECK(parse_decoder_activation("sigmoid") == DecoderActivation::sigmoid);
}
