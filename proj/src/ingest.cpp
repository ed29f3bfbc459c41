#include "autoseqrec/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

namespace {

std::vector<std::string_view> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc() && ptr == s.data() + s.size()) return true;
  // Some exports write integral timestamps as "1400000000.0".
  double d = 0.0;
  const auto [dptr, dec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (dec != std::errc() || dptr != s.data() + s.size() || d != std::floor(d)) return false;
  out = static_cast<std::int64_t>(d);
  return true;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::uint64_t fnv1a(std::uint64_t hash, std::string_view bytes) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

DatasetFormat parse_format(std::string_view tag) {
  if (tag == "ml100k") return DatasetFormat::ml100k;
  if (tag == "ml1m") return DatasetFormat::ml1m;
  if (tag == "amazon-csv") return DatasetFormat::amazon_csv;
  throw ConfigError("unknown dataset format '" + std::string(tag) + "' (expected ml100k, ml1m or amazon-csv)");
}

std::string_view format_name(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::ml100k: return "ml100k";
    case DatasetFormat::ml1m: return "ml1m";
    case DatasetFormat::amazon_csv: return "amazon-csv";
  }
  return "?";
}

UserIndex Vocabulary::add_user(const std::string& key) {
  const auto [it, inserted] = user_map_.try_emplace(key, num_users());
  if (inserted) user_keys_.push_back(key);
  return it->second;
}

ItemIndex Vocabulary::add_item(const std::string& key) {
  const auto [it, inserted] = item_map_.try_emplace(key, num_items());
  if (inserted) item_keys_.push_back(key);
  return it->second;
}

UserIndex Vocabulary::find_user(const std::string& key) const {
  const auto it = user_map_.find(key);
  return it == user_map_.end() ? -1 : it->second;
}

ItemIndex Vocabulary::find_item(const std::string& key) const {
  const auto it = item_map_.find(key);
  return it == item_map_.end() ? -1 : it->second;
}

std::uint64_t Vocabulary::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, "users\n");
  for (const auto& k : user_keys_) {
    h = fnv1a(h, k);
    h = fnv1a(h, "\n");
  }
  h = fnv1a(h, "items\n");
  for (const auto& k : item_keys_) {
    h = fnv1a(h, k);
    h = fnv1a(h, "\n");
  }
  return h;
}

std::string Vocabulary::digest_hex() const {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << digest();
  return out.str();
}

bool parse_line(std::string_view line, DatasetFormat format, std::int64_t file_order, RawEvent& out) {
  std::vector<std::string_view> fields;
  switch (format) {
    case DatasetFormat::ml100k: fields = split_on(line, "\t"); break;
    case DatasetFormat::ml1m: fields = split_on(line, "::"); break;
    case DatasetFormat::amazon_csv: fields = split_on(line, ","); break;
  }
  if (fields.size() != 4) return false;
  const auto user = trim(fields[0]);
  const auto item = trim(fields[1]);
  if (user.empty() || item.empty()) return false;
  double rating = 0.0;
  std::int64_t ts = 0;
  if (!parse_double(fields[2], rating) || !parse_int(fields[3], ts) || ts < 0) return false;
  out.user_key.assign(user);
  out.item_key.assign(item);
  out.rating = rating;
  out.timestamp = ts;
  out.file_order = file_order;
  return true;
}

ParseResult parse_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset file " + path.string());
  ParseResult result;
  std::string line;
  std::int64_t index = 0;
  RawEvent ev;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (parse_line(line, format, index, ev)) {
      result.events.push_back(ev);
    } else if (!trim(line).empty()) {
      ++result.malformed_lines;
    }
    ++index;
  }
  if (result.events.empty()) {
    throw Error("no parseable " + std::string(format_name(format)) + " lines in " + path.string());
  }
  return result;
}

std::vector<RawEvent> filter_min_count(const std::vector<RawEvent>& events, int min_count, bool iterative) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::vector<RawEvent> current = events;
  while (true) {
    std::unordered_map<std::string, int> user_counts;
    std::unordered_map<std::string, int> item_counts;
    for (const auto& e : current) {
      ++user_counts[e.user_key];
      ++item_counts[e.item_key];
    }
    std::vector<RawEvent> kept;
    kept.reserve(current.size());
    for (const auto& e : current) {
      if (user_counts[e.user_key] >= min_count && item_counts[e.item_key] >= min_count) kept.push_back(e);
    }
    const bool stable = kept.size() == current.size();
    current = std::move(kept);
    if (!iterative || stable) break;
  }
  if (current.empty()) {
    throw Error("filtering with min_count=" + std::to_string(min_count) + " removed every event");
  }
  return current;
}

PreparedDataset index_and_sort(std::vector<RawEvent> events) {
  if (events.empty()) throw Error("cannot index an empty event list");
  std::sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.file_order < b.file_order;
  });
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i - 1].timestamp == events[i].timestamp && events[i - 1].file_order == events[i].file_order) {
      throw Error("duplicate file_order " + std::to_string(events[i].file_order) + " breaks the total order");
    }
  }
  PreparedDataset out;
  out.log.events.reserve(events.size());
  for (const auto& e : events) {
    const UserIndex u = out.vocab.add_user(e.user_key);
    const ItemIndex i = out.vocab.add_item(e.item_key);
    out.log.events.push_back(Event{u, i, e.timestamp, e.file_order});
  }
  out.log.num_users = out.vocab.num_users();
  out.log.num_items = out.vocab.num_items();
  return out;
}

InteractionLog slice(const InteractionLog& log, std::size_t begin, std::size_t end) {
  InteractionLog out;
  out.num_users = log.num_users;
  out.num_items = log.num_items;
  out.events.assign(log.events.begin() + static_cast<std::ptrdiff_t>(begin),
                    log.events.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

SplitLog chronological_split(const InteractionLog& log, double train_frac, double val_frac) {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(train_frac + val_frac < 1.0)) {
    throw ConfigError("split fractions must be positive with train_frac + val_frac < 1");
  }
  const std::size_t n = log.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
  if (n_val == 0) {
    throw Error("log of " + std::to_string(n) + " events yields an empty validation split");
  }
  if (n_train + n_val >= n) {
    throw Error("log of " + std::to_string(n) + " events yields an empty test split");
  }
  SplitLog split;
  split.train = slice(log, 0, n_train);
  split.validation = slice(log, n_train, n_train + n_val);
  split.test = slice(log, n_train + n_val, n);
  return split;
}

void write_prepared(const PreparedDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("events.tsv");
    for (const auto& e : data.log.events) out << e.user << '\t' << e.item << '\t' << e.timestamp << '\n';
    if (!out) throw Error("write failed for events.tsv");
  }
  {
    auto out = open("users.txt");
    for (const auto& k : data.vocab.user_keys()) out << k << '\n';
  }
  {
    auto out = open("items.txt");
    for (const auto& k : data.vocab.item_keys()) out << k << '\n';
  }
}

PreparedDataset read_prepared(const std::filesystem::path& dir) {
  PreparedDataset out;
  for (const auto& k : read_lines(dir / "users.txt")) out.vocab.add_user(k);
  for (const auto& k : read_lines(dir / "items.txt")) out.vocab.add_item(k);
  out.log.num_users = out.vocab.num_users();
  out.log.num_items = out.vocab.num_items();
  const auto lines = read_lines(dir / "events.tsv");
  out.log.events.reserve(lines.size());
  std::int64_t order = 0;
  for (const auto& line : lines) {
    const auto fields = split_on(line, "\t");
    std::int64_t u = 0, i = 0, t = 0;
    if (fields.size() != 3 || !parse_int(fields[0], u) || !parse_int(fields[1], i) || !parse_int(fields[2], t)) {
      throw Error("malformed canonical event at line " + std::to_string(order) + " of " +
                  (dir / "events.tsv").string());
    }
    if (u < 0 || u >= out.log.num_users || i < 0 || i >= out.log.num_items) {
      throw Error("canonical event at line " + std::to_string(order) + " is outside the vocabulary");
    }
    if (!out.log.events.empty() && out.log.events.back().timestamp > t) {
      throw Error("canonical events are not sorted at line " + std::to_string(order));
    }
    out.log.events.push_back(Event{static_cast<UserIndex>(u), static_cast<ItemIndex>(i), t, order});
    ++order;
  }
  return out;
}

}  // namespace autoseqrec
