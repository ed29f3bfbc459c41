#pragma once

// Container layout shared by model checkpoints and matrix snapshots:
//
//   "ASRQ1\n"                6 bytes magic
//   u64 little-endian        length L of the header
//   header                   L bytes of UTF-8 JSON terminated by '\n'
//   sections                 raw little-endian arrays, back to back, in header order;
//                            section offsets are relative to the first byte after the header.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "autoseqrec/matrices.hpp"
#include "autoseqrec/model.hpp"

namespace autoseqrec {

inline constexpr char kMagic[] = "ASRQ1\n";
inline constexpr std::size_t kMagicSize = 6;
inline constexpr int kFormatVersion = 1;

struct CheckpointMeta {
  std::int64_t num_users = 0;
  std::uint64_t seed = 0;
  std::string vocab_digest;
};

struct LoadedCheckpoint {
  ModelParams params;
  CheckpointMeta meta;
  nlohmann::json header;
};

/// Writes parameters as f32 sections W_e, b_e, W_c, b_c, W_s, b_s, W_t, b_t (row-major) and fsyncs.
void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta, const std::filesystem::path& path);

/// Validates magic, version, vocabulary digest (when given) and every section length.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<std::string>& expected_vocab_digest = std::nullopt);

/// Parameters rounded through f32, i.e. exactly what a save/load roundtrip produces.
ModelParams round_to_f32(const ModelParams& params);

/// Snapshot sections: R (packed bit rows, LSB first), T (u32), last_item (i32, -1 = none), counts (u32).
void save_state(const MatrixState& state, const std::filesystem::path& path, const std::string& vocab_digest = {});
MatrixState load_state(const std::filesystem::path& path,
                       const std::optional<std::string>& expected_vocab_digest = std::nullopt);

/// Size of every section for a model of the given shape.
std::uint64_t checkpoint_payload_bytes(std::int64_t num_items, std::int64_t hidden);

}  // namespace autoseqrec
