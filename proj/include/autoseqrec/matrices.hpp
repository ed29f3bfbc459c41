#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "autoseqrec/ingest.hpp"

namespace autoseqrec {

/// Rows and columns whose contents changed after one applied interaction.
struct TouchedRows {
  UserIndex user = 0;                          // row of R
  std::optional<ItemIndex> transition_row;     // row j of T (previous item)
  std::optional<ItemIndex> transition_column;  // column i of T (new item)
};

/// Interaction matrix R (binary, m x n), transition counts T (n x n) and per-user
/// sequence state. Dense row-major storage; dimensions are fixed at construction.
class MatrixState {
 public:
  MatrixState() = default;
  MatrixState(std::int32_t num_users, std::int32_t num_items, bool count_self_transitions = true);

  std::int32_t num_users() const { return num_users_; }
  std::int32_t num_items() const { return num_items_; }
  bool counts_self_transitions() const { return count_self_transitions_; }

  std::uint8_t interaction(UserIndex u, ItemIndex i) const {
    return interactions_[static_cast<std::size_t>(u) * n() + static_cast<std::size_t>(i)];
  }
  std::uint32_t transition(ItemIndex from, ItemIndex to) const {
    return transitions_[static_cast<std::size_t>(from) * n() + static_cast<std::size_t>(to)];
  }
  std::span<const std::uint8_t> interaction_row(UserIndex u) const {
    return {interactions_.data() + static_cast<std::size_t>(u) * n(), n()};
  }
  std::span<const std::uint32_t> transition_row(ItemIndex i) const {
    return {transitions_.data() + static_cast<std::size_t>(i) * n(), n()};
  }

  std::optional<ItemIndex> last_item(UserIndex u) const {
    const auto v = last_item_[static_cast<std::size_t>(u)];
    return v < 0 ? std::nullopt : std::optional<ItemIndex>(v);
  }
  std::uint32_t count(UserIndex u) const { return counts_[static_cast<std::size_t>(u)]; }
  std::uint64_t applied_count() const { return applied_; }

  /// Folds one event into the state and reports which rows/columns changed.
  TouchedRows apply_interaction(UserIndex u, ItemIndex i);

  std::uint64_t transition_total() const;

  // Raw storage, used by persistence.
  const std::vector<std::uint8_t>& interaction_data() const { return interactions_; }
  const std::vector<std::uint32_t>& transition_data() const { return transitions_; }
  const std::vector<std::int32_t>& last_item_data() const { return last_item_; }
  const std::vector<std::uint32_t>& count_data() const { return counts_; }

  static MatrixState from_raw(std::int32_t num_users, std::int32_t num_items, bool count_self_transitions,
                              std::vector<std::uint8_t> interactions, std::vector<std::uint32_t> transitions,
                              std::vector<std::int32_t> last_item, std::vector<std::uint32_t> counts,
                              std::uint64_t applied);

  friend bool operator==(const MatrixState&, const MatrixState&) = default;

 private:
  std::size_t n() const { return static_cast<std::size_t>(num_items_); }
  void check_indices(UserIndex u, ItemIndex i) const;

  std::int32_t num_users_ = 0;
  std::int32_t num_items_ = 0;
  bool count_self_transitions_ = true;
  std::vector<std::uint8_t> interactions_;
  std::vector<std::uint32_t> transitions_;
  std::vector<std::int32_t> last_item_;
  std::vector<std::uint32_t> counts_;
  std::uint64_t applied_ = 0;
};

/// Batch construction over the log; equals folding apply_interaction over its events.
MatrixState build_state(const InteractionLog& log, bool count_self_transitions = true);

/// Items of user u in the log's order.
std::vector<ItemIndex> user_sequence(const InteractionLog& log, UserIndex u);

}  // namespace autoseqrec
