#include "autoseqrec/persist.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "autoseqrec/error.hpp"

namespace autoseqrec {

static_assert(std::endian::native == std::endian::little, "container format assumes a little-endian host");

namespace {

struct Section {
  std::string name;
  std::string dtype;
  std::vector<std::int64_t> shape;
  std::string bytes;
};

template <typename T>
void append_pod(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename Derived>
Section f32_section(std::string name, const Eigen::DenseBase<Derived>& a, bool vector) {
  Section s{std::move(name), "f32", {}, {}};
  if (vector) s.shape = {a.size()};
  else s.shape = {a.rows(), a.cols()};
  s.bytes.reserve(static_cast<std::size_t>(a.size()) * 4);
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) append_pod(s.bytes, static_cast<float>(a(r, c)));
  return s;
}

void write_container(const std::filesystem::path& path, nlohmann::json header, const std::vector<Section>& sections) {
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& s : sections) {
    table.push_back({{"name", s.name}, {"dtype", s.dtype}, {"shape", s.shape}, {"offset", offset},
                     {"length", s.bytes.size()}});
    offset += s.bytes.size();
  }
  header["format_version"] = kFormatVersion;
  header["sections"] = std::move(table);
  const std::string text = header.dump() + "\n";

  std::string blob(kMagic, kMagicSize);
  append_pod(blob, static_cast<std::uint64_t>(text.size()));
  blob += text;
  for (const auto& s : sections) blob += s.bytes;

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw Error("cannot open " + path.string() + " for writing");
  const bool ok = std::fwrite(blob.data(), 1, blob.size(), f) == blob.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  const bool closed = std::fclose(f) == 0;
  if (!ok || !closed) throw Error("failed writing " + path.string());
}

struct Container {
  nlohmann::json header;
  std::string data;  // bytes after the header

  std::string_view section(const std::string& name, std::uint64_t expected_length) const {
    for (const auto& s : header.at("sections")) {
      if (s.at("name") != name) continue;
      const auto offset = s.at("offset").get<std::uint64_t>();
      const auto length = s.at("length").get<std::uint64_t>();
      if (length != expected_length) {
        throw Error("section '" + name + "' has length " + std::to_string(length) + ", expected " +
                    std::to_string(expected_length));
      }
      if (offset > data.size() || data.size() - offset < length) {
        throw Error("truncated section '" + name + "': file ends before its " + std::to_string(length) + " bytes");
      }
      return std::string_view(data).substr(offset, length);
    }
    throw Error("missing section '" + name + "'");
  }
};

Container read_container(const std::filesystem::path& path, const std::string& kind,
                         const std::optional<std::string>& expected_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < kMagicSize || std::memcmp(blob.data(), kMagic, kMagicSize) != 0) {
    throw Error("bad magic in " + path.string() + ": not an ASRQ1 container");
  }
  if (blob.size() < kMagicSize + 8) throw Error("truncated header length in " + path.string());
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, blob.data() + kMagicSize, 8);
  if (blob.size() - kMagicSize - 8 < header_len) throw Error("truncated header in " + path.string());
  Container c;
  try {
    c.header = nlohmann::json::parse(blob.substr(kMagicSize + 8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error("unreadable header in " + path.string() + ": " + e.what());
  }
  if (!c.header.is_object() || c.header.value("format_version", -1) != kFormatVersion) {
    throw Error("unsupported format version in " + path.string() + " (expected " + std::to_string(kFormatVersion) +
                ")");
  }
  if (c.header.value("kind", std::string()) != kind) {
    throw Error(path.string() + " is not a " + kind + " file");
  }
  if (expected_digest && c.header.value("vocab_digest", std::string()) != *expected_digest) {
    throw Error("vocabulary drift: " + path.string() + " was written for vocabulary " +
                c.header.value("vocab_digest", std::string("<none>")) + " but the dataset has " + *expected_digest);
  }
  c.data = blob.substr(kMagicSize + 8 + header_len);
  return c;
}

template <typename M>
void read_f32(std::string_view bytes, M& dst, Eigen::Index rows, Eigen::Index cols) {
  dst.resize(rows, cols);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      float v = 0.0f;
      std::memcpy(&v, bytes.data() + pos, 4);
      dst(r, c) = v;
      pos += 4;
    }
}

template <typename T>
std::vector<T> read_array(std::string_view bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
  return out;
}

const std::array<std::pair<const char*, const char*>, 3> kDecoderNames = {
    {{"W_c", "b_c"}, {"W_s", "b_s"}, {"W_t", "b_t"}}};

}  // namespace

std::uint64_t checkpoint_payload_bytes(std::int64_t n, std::int64_t k) {
  return 4u * static_cast<std::uint64_t>(n * k + k + 3 * (k * n + n));
}

void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta, const std::filesystem::path& path) {
  params.validate();
  std::vector<Section> sections;
  sections.push_back(f32_section("W_e", params.encoder_weight, false));
  sections.push_back(f32_section("b_e", params.encoder_bias, true));
  for (Head h : kHeads) {
    const auto& names = kDecoderNames[static_cast<std::size_t>(h)];
    sections.push_back(f32_section(names.first, params.weight(h), false));
    sections.push_back(f32_section(names.second, params.bias(h), true));
  }
  nlohmann::json header = {{"kind", "model"},
                           {"m", meta.num_users},
                           {"n", params.num_items()},
                           {"k", params.hidden()},
                           {"encoder_activation", "sigmoid"},
                           {"decoder_activation", activation_name(params.decoder_activation)},
                           {"transform", transform_name(params.transform)},
                           {"seed", meta.seed},
                           {"vocab_digest", meta.vocab_digest}};
  write_container(path, std::move(header), sections);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<std::string>& expected_vocab_digest) {
  const Container c = read_container(path, "model", expected_vocab_digest);
  LoadedCheckpoint out;
  try {
    const auto n = c.header.at("n").get<Eigen::Index>();
    const auto k = c.header.at("k").get<Eigen::Index>();
    if (n < 1 || k < 1) throw Error("checkpoint declares invalid dimensions");
    const auto nu = static_cast<std::uint64_t>(n);
    const auto ku = static_cast<std::uint64_t>(k);
    auto& p = out.params;
    p.decoder_activation = parse_decoder_activation(c.header.at("decoder_activation").get<std::string>());
    p.transform = parse_transform(c.header.at("transform").get<std::string>());
    read_f32(c.section("W_e", 4 * nu * ku), p.encoder_weight, n, k);
    read_f32(c.section("b_e", 4 * ku), p.encoder_bias, k, 1);
    for (Head h : kHeads) {
      const auto& names = kDecoderNames[static_cast<std::size_t>(h)];
      read_f32(c.section(names.first, 4 * ku * nu), p.weight(h), k, n);
      read_f32(c.section(names.second, 4 * nu), p.bias(h), n, 1);
    }
    p.validate();
    out.meta.num_users = c.header.value("m", std::int64_t{0});
    out.meta.seed = c.header.value("seed", std::uint64_t{0});
    out.meta.vocab_digest = c.header.value("vocab_digest", std::string());
    out.header = c.header;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  return out;
}

ModelParams round_to_f32(const ModelParams& params) {
  ModelParams p = params;
  auto round = [](auto& m) { m = m.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); }); };
  round(p.encoder_weight);
  round(p.encoder_bias);
  for (Head h : kHeads) {
    round(p.weight(h));
    round(p.bias(h));
  }
  return p;
}

void save_state(const MatrixState& state, const std::filesystem::path& path, const std::string& vocab_digest) {
  const auto m = static_cast<std::size_t>(state.num_users());
  const auto n = static_cast<std::size_t>(state.num_items());
  const std::size_t stride = (n + 7) / 8;
  Section r{"R", "bits", {state.num_users(), state.num_items()}, std::string(m * stride, '\0')};
  for (std::size_t u = 0; u < m; ++u) {
    const auto row = state.interaction_row(static_cast<UserIndex>(u));
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] != 0) r.bytes[u * stride + j / 8] = static_cast<char>(r.bytes[u * stride + j / 8] | (1 << (j % 8)));
    }
  }
  auto raw = [](std::string name, std::string dtype, std::vector<std::int64_t> shape, const auto& vec) {
    Section s{std::move(name), std::move(dtype), std::move(shape), {}};
    s.bytes.assign(reinterpret_cast<const char*>(vec.data()), vec.size() * sizeof(vec[0]));
    return s;
  };
  std::vector<Section> sections;
  sections.push_back(std::move(r));
  sections.push_back(raw("T", "u32", {state.num_items(), state.num_items()}, state.transition_data()));
  sections.push_back(raw("last_item", "i32", {state.num_users()}, state.last_item_data()));
  sections.push_back(raw("counts", "u32", {state.num_users()}, state.count_data()));
  nlohmann::json header = {{"kind", "state"},
                           {"m", state.num_users()},
                           {"n", state.num_items()},
                           {"applied_count", state.applied_count()},
                           {"count_self_transitions", state.counts_self_transitions()},
                           {"vocab_digest", vocab_digest}};
  write_container(path, std::move(header), sections);
}

MatrixState load_state(const std::filesystem::path& path, const std::optional<std::string>& expected_vocab_digest) {
  const Container c = read_container(path, "state", expected_vocab_digest);
  try {
    const auto m = c.header.at("m").get<std::int32_t>();
    const auto n = c.header.at("n").get<std::int32_t>();
    if (m < 0 || n < 0) throw Error("snapshot declares negative dimensions");
    const auto mu = static_cast<std::size_t>(m);
    const auto nu = static_cast<std::size_t>(n);
    const std::size_t stride = (nu + 7) / 8;
    const auto bits = c.section("R", mu * stride);
    std::vector<std::uint8_t> interactions(mu * nu, 0);
    for (std::size_t u = 0; u < mu; ++u)
      for (std::size_t j = 0; j < nu; ++j)
        interactions[u * nu + j] = (static_cast<unsigned char>(bits[u * stride + j / 8]) >> (j % 8)) & 1u;
    auto transitions = read_array<std::uint32_t>(c.section("T", 4 * nu * nu));
    auto last = read_array<std::int32_t>(c.section("last_item", 4 * mu));
    auto counts = read_array<std::uint32_t>(c.section("counts", 4 * mu));
    for (auto v : last) {
      if (v < -1 || v >= n) throw Error("snapshot last_item entry out of range");
    }
    return MatrixState::from_raw(m, n, c.header.at("count_self_transitions").get<bool>(), std::move(interactions),
                                 std::move(transitions), std::move(last), std::move(counts),
                                 c.header.at("applied_count").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed snapshot header in " + path.string() + ": " + e.what());
  }
}

}  // namespace autoseqrec
