#include "autoseqrec/matrices.hpp"

#include <numeric>
#include <string>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

MatrixState::MatrixState(std::int32_t num_users, std::int32_t num_items, bool count_self_transitions)
    : num_users_(num_users),
      num_items_(num_items),
      count_self_transitions_(count_self_transitions) {
  if (num_users < 0 || num_items < 0) throw Error("matrix dimensions must be non-negative");
  const auto m = static_cast<std::size_t>(num_users);
  const auto items = static_cast<std::size_t>(num_items);
  interactions_.assign(m * items, 0);
  transitions_.assign(items * items, 0);
  last_item_.assign(m, -1);
  counts_.assign(m, 0);
}

void MatrixState::check_indices(UserIndex u, ItemIndex i) const {
  if (u < 0 || u >= num_users_ || i < 0 || i >= num_items_) {
    throw Error("interaction (" + std::to_string(u) + ", " + std::to_string(i) + ") outside " +
                std::to_string(num_users_) + "x" + std::to_string(num_items_) + " matrix");
  }
}

TouchedRows MatrixState::apply_interaction(UserIndex u, ItemIndex i) {
  check_indices(u, i);
  const auto uu = static_cast<std::size_t>(u);
  TouchedRows touched;
  touched.user = u;
  interactions_[uu * n() + static_cast<std::size_t>(i)] = 1;
  const std::int32_t prev = last_item_[uu];
  if (prev >= 0 && (count_self_transitions_ || prev != i)) {
    ++transitions_[static_cast<std::size_t>(prev) * n() + static_cast<std::size_t>(i)];
    touched.transition_row = prev;
    touched.transition_column = i;
  }
  last_item_[uu] = i;
  ++counts_[uu];
  ++applied_;
  return touched;
}

std::uint64_t MatrixState::transition_total() const {
  return std::accumulate(transitions_.begin(), transitions_.end(), std::uint64_t{0});
}

MatrixState MatrixState::from_raw(std::int32_t num_users, std::int32_t num_items, bool count_self_transitions,
                                  std::vector<std::uint8_t> interactions, std::vector<std::uint32_t> transitions,
                                  std::vector<std::int32_t> last_item, std::vector<std::uint32_t> counts,
                                  std::uint64_t applied) {
  const auto m = static_cast<std::size_t>(num_users);
  const auto items = static_cast<std::size_t>(num_items);
  if (interactions.size() != m * items || transitions.size() != items * items || last_item.size() != m ||
      counts.size() != m) {
    throw Error("matrix state arrays inconsistent with " + std::to_string(num_users) + "x" +
                std::to_string(num_items));
  }
  MatrixState s;
  s.num_users_ = num_users;
  s.num_items_ = num_items;
  s.count_self_transitions_ = count_self_transitions;
  s.interactions_ = std::move(interactions);
  s.transitions_ = std::move(transitions);
  s.last_item_ = std::move(last_item);
  s.counts_ = std::move(counts);
  s.applied_ = applied;
  return s;
}

MatrixState build_state(const InteractionLog& log, bool count_self_transitions) {
  MatrixState state(log.num_users, log.num_items, count_self_transitions);
  for (const auto& e : log.events) state.apply_interaction(e.user, e.item);
  return state;
}

std::vector<ItemIndex> user_sequence(const InteractionLog& log, UserIndex u) {
  std::vector<ItemIndex> items;
  for (const auto& e : log.events) {
    if (e.user == u) items.push_back(e.item);
  }
  return items;
}

}  // namespace autoseqrec
