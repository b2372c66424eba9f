#pragma once

// Shared utilities for the test binaries. Deliberately doctest-free so both
// the unit tests and the standalone acceptance runner can include it.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gowu/env.hpp"

namespace gowu::testing {

// ---------------------------------------------------------------------------
// Hex round-trip for golden byte fixtures.

inline std::string hex_encode(std::span<const uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

inline std::vector<uint8_t> hex_decode(const std::string& hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::vector<uint8_t> out;
  out.reserve(hex.size() / 2);
  int hi = -1;
  for (char c : hex) {
    if (c == '\n' || c == '\r' || c == ' ' || c == '\t') continue;
    int v = nibble(c);
    if (v < 0) throw std::runtime_error("hex_decode: bad character");
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<uint8_t>((hi << 4) | v));
      hi = -1;
    }
  }
  if (hi >= 0) throw std::runtime_error("hex_decode: odd length");
  return out;
}

// ---------------------------------------------------------------------------
// Pearson chi-square statistic against a uniform expectation.

inline double chi_square_uniform(const std::vector<uint64_t>& counts) {
  uint64_t total = 0;
  for (uint64_t c : counts) total += c;
  if (counts.empty() || total == 0) return 0.0;
  double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (uint64_t c : counts) {
    double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

// ---------------------------------------------------------------------------
// Exhaustive breadth-first walk of an environment's reachable state space,
// deduplicated on snapshot bytes. Independent of any closed-form node count,
// so it can serve as the oracle those formulas are checked against.

struct EnumerationResult {
  uint64_t states = 0;       // distinct reachable states, start included
  uint64_t dead_states = 0;  // states whose status is Dead
  uint64_t live_terminals = 0;  // alive states with no actions left
  double best_reward = 0.0;  // max cumulative reward over all explored paths
  bool capped = false;       // true when the walk hit the state cap
};

inline EnumerationResult enumerate_reachable(Env& env, uint64_t state_cap = 2'000'000) {
  EnumerationResult r;
  auto key = [](const Snapshot& s) { return fnv1a64(s.blob); };

  struct Entry {
    Snapshot snap;
    double cum = 0.0;
  };
  std::deque<Entry> frontier;
  std::unordered_set<uint64_t> seen;

  Entry start{env.snapshot(), 0.0};
  seen.insert(key(start.snap));
  frontier.push_back(start);

  while (!frontier.empty()) {
    Entry cur = frontier.front();
    frontier.pop_front();
    ++r.states;
    if (cur.cum > r.best_reward) r.best_reward = cur.cum;
    env.restore(cur.snap);
    if (env.status() == Status::Dead) {
      ++r.dead_states;
      continue;
    }
    int ar = env.arity();
    if (ar == 0) {
      ++r.live_terminals;
      continue;
    }
    for (int a = 0; a < ar; ++a) {
      env.restore(cur.snap);
      StepResult res = env.step(Action{a});
      Entry next{env.snapshot(), cur.cum + res.reward};
      if (next.cum > r.best_reward) r.best_reward = next.cum;
      if (seen.size() >= state_cap) {
        r.capped = true;
        return r;
      }
      if (seen.insert(key(next.snap)).second) frontier.push_back(std::move(next));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Scratch directory removed on scope exit.

class TempDir {
 public:
  TempDir() {
    namespace fs = std::filesystem;
    fs::path base = fs::temp_directory_path();
    static uint64_t counter = 0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      fs::path candidate = base / ("gowu-test-" + std::to_string(++counter) + "-" +
                                   std::to_string(attempt));
      std::error_code ec;
      if (fs::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("TempDir: could not create a scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_text: cannot open " + path);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_text: cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::vector<uint8_t> read_bytes(const std::string& path) {
  std::string text = read_text(path);
  return std::vector<uint8_t>(text.begin(), text.end());
}

// Reads a committed golden fixture (whitespace stripped). GOWU_TEST_DIR is
// injected by the build so the tests can run from any working directory.
inline std::string read_fixture(const std::string& name) {
#ifdef GOWU_TEST_DIR
  std::string dir = GOWU_TEST_DIR;
#else
  std::string dir = "tests";
#endif
  std::string raw = read_text(dir + "/fixtures/" + name);
  std::string out;
  for (char c : raw)
    if (c != '\n' && c != '\r' && c != ' ' && c != '\t') out.push_back(c);
  return out;
}

}  // namespace gowu::testing
