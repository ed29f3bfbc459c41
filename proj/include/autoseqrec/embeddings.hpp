#pragma once

#include <cstdint>
#include <vector>

#include "autoseqrec/matrices.hpp"
#include "autoseqrec/model.hpp"

namespace autoseqrec {

/// Cached encoder outputs for every row of R (collab), Phi(T) (source) and Phi(T)^T (target).
/// Rows are marked dirty when their input row changes and recomputed on refresh().
class EmbeddingCache {
 public:
  EmbeddingCache() = default;

  const RowMatrix& collab() const { return collab_; }
  const RowMatrix& source() const { return source_; }
  const RowMatrix& target() const { return target_; }

  // Testing hooks for hand-built fixtures.
  RowMatrix& mutable_collab() { return collab_; }
  RowMatrix& mutable_source() { return source_; }
  RowMatrix& mutable_target() { return target_; }

  /// Recomputes every row of all three tables.
  void warm(const MatrixState& state, const ModelParams& params);

  void mark_dirty(const TouchedRows& touched);
  /// Recomputes dirty rows only; returns how many rows were recomputed.
  std::size_t refresh(const MatrixState& state, const ModelParams& params);

  bool is_clean() const { return dirty_.empty(); }
  bool collab_dirty(UserIndex u) const;
  std::uint64_t rows_refreshed() const { return rows_refreshed_; }

  static EmbeddingCache from_tables(RowMatrix collab, RowMatrix source, RowMatrix target);

 private:
  struct DirtyRow {
    Head table;
    std::int32_t row;
    friend bool operator==(const DirtyRow&, const DirtyRow&) = default;
  };

  void encode_into(Head table, std::int32_t row, const MatrixState& state, const ModelParams& params);

  RowMatrix collab_;
  RowMatrix source_;
  RowMatrix target_;
  std::vector<DirtyRow> dirty_;
  std::uint64_t rows_refreshed_ = 0;
};

/// Encoder output for a single row given as sparse (index, value) pairs.
/// Accumulates in ascending index order, so every caller gets bit-identical results.
void encode_sparse_row(const std::vector<std::pair<std::int32_t, double>>& entries, const ModelParams& params,
                       Eigen::Ref<RowVector> out);

}  // namespace autoseqrec
