#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "autoseqrec/error.hpp"
#include "autoseqrec/matrices.hpp"
#include "test_support.hpp"

using namespace autoseqrec;

namespace {

InteractionLog make_log(int m, int n, std::initializer_list<std::pair<int, int>> pairs) {
  InteractionLog log;
  log.num_users = m;
  log.num_items = n;
  std::int64_t t = 0;
  for (auto [u, i] : pairs) log.events.push_back({u, i, t, t}), ++t;
  return log;
}

// Sum over users of max(n_u - 1, 0) for the first `prefix` events.
std::uint64_t expected_transitions(const InteractionLog& log, std::size_t prefix) {
  std::vector<std::uint64_t> per_user(static_cast<std::size_t>(log.num_users));
  for (std::size_t e = 0; e < prefix; ++e) ++per_user[static_cast<std::size_t>(log.events[e].user)];
  std::uint64_t total = 0;
  for (auto c : per_user) total += c > 0 ? c - 1 : 0;
  return total;
}

}  // namespace

TEST_CASE("empty log gives empty matrices") {
  auto s = build_state(make_log(3, 4, {}));
  CHECK(s.transition_total() == 0);
  for (int u = 0; u < 3; ++u) {
    CHECK(s.count(u) == 0);
    CHECK_FALSE(s.last_item(u).has_value());
    for (int i = 0; i < 4; ++i) CHECK(s.interaction(u, i) == 0);
  }
}

TEST_CASE("consecutive pairs per user") {
  // u0: 0,1,0 and u1: 1,0
  auto s = build_state(make_log(2, 2, {{0, 0}, {1, 1}, {0, 1}, {1, 0}, {0, 0}}));
  for (int u = 0; u < 2; ++u) {
    CHECK(s.interaction(u, 0) == 1);
    CHECK(s.interaction(u, 1) == 1);
  }
  CHECK(s.transition(0, 1) == 1);
  CHECK(s.transition(1, 0) == 2);
  CHECK(s.transition(0, 0) == 0);
  CHECK(s.transition(1, 1) == 0);
}

TEST_CASE("single event leaves T empty") {
  auto s = build_state(make_log(1, 4, {{0, 3}}));
  CHECK(s.interaction(0, 3) == 1);
  CHECK(s.transition_total() == 0);
  CHECK(s.last_item(0) == 3);
}

TEST_CASE("apply_interaction bookkeeping") {
  MatrixState s(2, 6);
  auto first = s.apply_interaction(0, 5);
  CHECK(s.transition_total() == 0);
  CHECK(s.interaction(0, 5) == 1);
  CHECK_FALSE(first.transition_row.has_value());
  CHECK(first.transition_column == std::nullopt);

  s.apply_interaction(1, 2);
  auto t = s.apply_interaction(1, 5);
  CHECK(s.transition(2, 5) == 1);
  CHECK(s.last_item(1) == 5);
  CHECK(s.interaction(1, 5) == 1);
  CHECK(t.user == 1);
  CHECK(t.transition_row == 2);
  CHECK(t.transition_column == 5);

  s.apply_interaction(0, 5);
  CHECK(s.transition(5, 5) == 1);
  CHECK(s.applied_count() == 4);

  CHECK_THROWS_AS(s.apply_interaction(2, 0), Error);
  CHECK_THROWS_AS(s.apply_interaction(0, 6), Error);
  CHECK_THROWS_AS(s.apply_interaction(-1, 0), Error);
}

TEST_CASE("self transitions can be excluded") {
  MatrixState s(1, 3, false);
  s.apply_interaction(0, 1);
  auto t = s.apply_interaction(0, 1);
  CHECK(s.transition(1, 1) == 0);
  CHECK_FALSE(t.transition_row.has_value());
  s.apply_interaction(0, 2);
  CHECK(s.transition(1, 2) == 1);
}

TEST_CASE("user_sequence") {
  auto log = make_log(3, 5, {{1, 1}, {0, 2}, {1, 3}});
  CHECK(user_sequence(log, 2).empty());
  CHECK(user_sequence(log, 1) == std::vector<ItemIndex>{1, 3});
}

TEST_CASE("streaming fold equals batch build and conserves transitions") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 50), n = 1 + static_cast<int>(rng() % 50);
    auto log = testing::random_log(rng, m, n, rng() % 2001);
    MatrixState s(m, n);
    std::vector<std::uint32_t> prev_t;
    for (std::size_t e = 0; e < log.size(); ++e) {
      const auto& ev = log.events[e];
      s.apply_interaction(ev.user, ev.item);
      CHECK(s.transition_total() == expected_transitions(log, e + 1));
      if (!prev_t.empty()) {
        for (std::size_t x = 0; x < prev_t.size(); ++x) REQUIRE(s.transition_data()[x] >= prev_t[x]);
      }
      if (e % 97 == 0) prev_t = s.transition_data();
    }
    CHECK(s == build_state(log));
  }
}

TEST_CASE("R is monotone and binary") {
  std::mt19937_64 rng(9);
  auto log = testing::clustered_log(rng, 5, 8, 300);
  MatrixState s(5, 8);
  std::vector<std::uint8_t> before = s.interaction_data();
  for (const auto& ev : log.events) {
    s.apply_interaction(ev.user, ev.item);
    const auto& now = s.interaction_data();
    for (std::size_t x = 0; x < now.size(); ++x) {
      REQUIRE(now[x] <= 1);
      REQUIRE(now[x] >= before[x]);
    }
    before = now;
  }
}

TEST_CASE("from_raw validates sizes") {
  CHECK_THROWS_AS(MatrixState::from_raw(2, 2, true, std::vector<std::uint8_t>(3), std::vector<std::uint32_t>(4),
                                        std::vector<std::int32_t>(2, -1), std::vector<std::uint32_t>(2), 0),
                  Error);
}
