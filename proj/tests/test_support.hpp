#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

#include "autoseqrec/ingest.hpp"

namespace testing {

inline std::filesystem::path temp_path(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("autoseqrec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline std::filesystem::path write_file(const std::string& name, const std::string& text) {
  auto path = temp_path(name);
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

// Events with strictly increasing timestamps over an m x n index space.
inline autoseqrec::InteractionLog random_log(std::mt19937_64& rng, int m, int n, std::size_t events) {
  autoseqrec::InteractionLog log;
  log.num_users = m;
  log.num_items = n;
  std::uniform_int_distribution<int> user(0, m - 1), item(0, n - 1);
  for (std::size_t e = 0; e < events; ++e) {
    log.events.push_back({user(rng), item(rng), static_cast<std::int64_t>(e), static_cast<std::int64_t>(e)});
  }
  return log;
}

// Random log where users revisit a small neighbourhood of items, so transitions repeat.
inline autoseqrec::InteractionLog clustered_log(std::mt19937_64& rng, int m, int n, std::size_t events) {
  autoseqrec::InteractionLog log;
  log.num_users = m;
  log.num_items = n;
  std::uniform_int_distribution<int> user(0, m - 1), step(-2, 3);
  std::vector<int> pos(static_cast<std::size_t>(m));
  for (int u = 0; u < m; ++u) pos[static_cast<std::size_t>(u)] = static_cast<int>(rng() % static_cast<unsigned>(n));
  for (std::size_t e = 0; e < events; ++e) {
    const int u = user(rng);
    int& p = pos[static_cast<std::size_t>(u)];
    p = ((p + step(rng)) % n + n) % n;
    log.events.push_back({u, p, static_cast<std::int64_t>(e), static_cast<std::int64_t>(e)});
  }
  return log;
}

}  // namespace testing
