#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace autoseqrec {

using UserIndex = std::int32_t;
using ItemIndex = std::int32_t;

enum class DatasetFormat { ml100k, ml1m, amazon_csv };

DatasetFormat parse_format(std::string_view tag);
std::string_view format_name(DatasetFormat format);

struct RawEvent {
  std::string user_key;
  std::string item_key;
  double rating = 0.0;
  std::int64_t timestamp = 0;
  std::int64_t file_order = 0;
};

struct ParseResult {
  std::vector<RawEvent> events;
  std::size_t malformed_lines = 0;
};

struct Event {
  UserIndex user = 0;
  ItemIndex item = 0;
  std::int64_t timestamp = 0;
  std::int64_t file_order = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Events sorted ascending by (timestamp, file_order) over a fixed m x n index space.
struct InteractionLog {
  std::vector<Event> events;
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

/// Dense index <-> external key maps. Index order is first appearance in the sorted log.
class Vocabulary {
 public:
  UserIndex add_user(const std::string& key);
  ItemIndex add_item(const std::string& key);

  std::int32_t num_users() const { return static_cast<std::int32_t>(user_keys_.size()); }
  std::int32_t num_items() const { return static_cast<std::int32_t>(item_keys_.size()); }

  const std::string& user_key(UserIndex u) const { return user_keys_.at(static_cast<std::size_t>(u)); }
  const std::string& item_key(ItemIndex i) const { return item_keys_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& user_keys() const { return user_keys_; }
  const std::vector<std::string>& item_keys() const { return item_keys_; }

  // -1 when the key is unknown.
  UserIndex find_user(const std::string& key) const;
  ItemIndex find_item(const std::string& key) const;

  /// 64-bit FNV-1a over both key lists; binds checkpoints to a prepared dataset.
  std::uint64_t digest() const;
  std::string digest_hex() const;

 private:
  std::vector<std::string> user_keys_;
  std::vector<std::string> item_keys_;
  std::unordered_map<std::string, UserIndex> user_map_;
  std::unordered_map<std::string, ItemIndex> item_map_;
};

struct SplitLog {
  InteractionLog train;
  InteractionLog validation;
  InteractionLog test;
};

struct PreparedDataset {
  InteractionLog log;
  Vocabulary vocab;
};

ParseResult parse_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Parses one data line. Returns false for lines that do not match the layout.
bool parse_line(std::string_view line, DatasetFormat format, std::int64_t file_order, RawEvent& out);

/// Keeps events whose user and item both occur at least `min_count` times in the input.
/// Single pass unless `iterative` is set, in which case filtering repeats until stable.
std::vector<RawEvent> filter_min_count(const std::vector<RawEvent>& events, int min_count = 5,
                                       bool iterative = false);

PreparedDataset index_and_sort(std::vector<RawEvent> events);

SplitLog chronological_split(const InteractionLog& log, double train_frac = 0.8, double val_frac = 0.1);

/// Sub-log of events [begin, end) sharing the parent's dimensions.
InteractionLog slice(const InteractionLog& log, std::size_t begin, std::size_t end);

/// Canonical on-disk form: events.tsv (user_idx, item_idx, timestamp), users.txt, items.txt.
void write_prepared(const PreparedDataset& data, const std::filesystem::path& dir);
PreparedDataset read_prepared(const std::filesystem::path& dir);

}  // namespace autoseqrec
