#include "autoseqrec/embeddings.hpp"

#include <algorithm>
#include <string>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

void encode_sparse_row(const std::vector<std::pair<std::int32_t, double>>& entries, const ModelParams& params,
                       Eigen::Ref<RowVector> out) {
  out = params.encoder_bias.transpose();
  for (const auto& [index, value] : entries) out.noalias() += value * params.encoder_weight.row(index);
  out = out.unaryExpr([](double x) { return sigmoid(x); });
}

void EmbeddingCache::encode_into(Head table, std::int32_t row, const MatrixState& state, const ModelParams& params) {
  std::vector<std::pair<std::int32_t, double>> entries;
  const std::int32_t n = state.num_items();
  switch (table) {
    case Head::collab: {
      const auto r = state.interaction_row(row);
      for (std::int32_t j = 0; j < n; ++j)
        if (r[static_cast<std::size_t>(j)] != 0) entries.emplace_back(j, 1.0);
      encode_sparse_row(entries, params, collab_.row(row));
      break;
    }
    case Head::source: {
      const auto r = state.transition_row(row);
      for (std::int32_t j = 0; j < n; ++j) {
        const auto c = r[static_cast<std::size_t>(j)];
        if (c != 0) entries.emplace_back(j, transform_count(c, params.transform));
      }
      encode_sparse_row(entries, params, source_.row(row));
      break;
    }
    case Head::target: {
      for (std::int32_t j = 0; j < n; ++j) {
        const auto c = state.transition(j, row);
        if (c != 0) entries.emplace_back(j, transform_count(c, params.transform));
      }
      encode_sparse_row(entries, params, target_.row(row));
      break;
    }
  }
  ++rows_refreshed_;
}

void EmbeddingCache::warm(const MatrixState& state, const ModelParams& params) {
  if (params.num_items() != state.num_items()) {
    throw Error("model expects n=" + std::to_string(params.num_items()) + " items but state has " +
                std::to_string(state.num_items()));
  }
  const auto k = params.hidden();
  collab_.resize(state.num_users(), k);
  source_.resize(state.num_items(), k);
  target_.resize(state.num_items(), k);
  for (std::int32_t u = 0; u < state.num_users(); ++u) encode_into(Head::collab, u, state, params);
  for (std::int32_t i = 0; i < state.num_items(); ++i) {
    encode_into(Head::source, i, state, params);
    encode_into(Head::target, i, state, params);
  }
  dirty_.clear();
}

void EmbeddingCache::mark_dirty(const TouchedRows& touched) {
  auto add = [&](Head table, std::int32_t row) {
    const DirtyRow d{table, row};
    if (std::find(dirty_.begin(), dirty_.end(), d) == dirty_.end()) dirty_.push_back(d);
  };
  add(Head::collab, touched.user);
  if (touched.transition_row) add(Head::source, *touched.transition_row);
  if (touched.transition_column) add(Head::target, *touched.transition_column);
}

std::size_t EmbeddingCache::refresh(const MatrixState& state, const ModelParams& params) {
  const std::size_t count = dirty_.size();
  for (const auto& d : dirty_) encode_into(d.table, d.row, state, params);
  dirty_.clear();
  return count;
}

bool EmbeddingCache::collab_dirty(UserIndex u) const {
  return std::find(dirty_.begin(), dirty_.end(), DirtyRow{Head::collab, u}) != dirty_.end();
}

EmbeddingCache EmbeddingCache::from_tables(RowMatrix collab, RowMatrix source, RowMatrix target) {
  if (collab.cols() != source.cols() || source.cols() != target.cols() || source.rows() != target.rows()) {
    throw Error("embedding tables have inconsistent shapes");
  }
  EmbeddingCache c;
  c.collab_ = std::move(collab);
  c.source_ = std::move(source);
  c.target_ = std::move(target);
  return c;
}

}  // namespace autoseqrec
