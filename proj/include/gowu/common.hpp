#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gowu {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ActionOutOfRange : Error { using Error::Error; };
struct DeadEnvironment : Error { using Error::Error; };
struct KindMismatch : Error { using Error::Error; };
struct CorruptSnapshot : Error { using Error::Error; };
struct InvalidDepth : Error { using Error::Error; };
struct UnsolvableLayout : Error { using Error::Error; };
struct NodeCapExceeded : Error { using Error::Error; };
struct UnknownParent : Error { using Error::Error; };
struct UnknownNode : Error { using Error::Error; };
struct NegativeOccupancy : Error { using Error::Error; };
struct DecodeError : Error { using Error::Error; };
struct NoCandidates : Error { using Error::Error; };
struct NoRewardEvents : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Hashing

inline uint64_t fnv1a64(std::span<const uint8_t> data, uint64_t seed = 0xcbf29ce484222325ULL) {
  uint64_t h = seed;
  for (uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes a list of values into one 64-bit key. Used to derive independent
// RNG streams per (seed, entity, counter) so results are schedule-invariant.
inline uint64_t derive_stream(std::initializer_list<uint64_t> keys) {
  uint64_t s = 0x8e2f1306a1b5f4d3ULL;
  for (uint64_t k : keys) {
    s ^= k;
    (void)splitmix64(s);
  }
  return splitmix64(s);
}

// ---------------------------------------------------------------------------
// RNG: splitmix64 core with unbiased bounded draws.

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() { return splitmix64(state_); }

  // Unbiased draw in [0, n) via rejection.
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw DomainError("Rng::next_below: n must be positive");
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Inclusive range draw.
  int uniform_int(int lo, int hi) {
    if (lo > hi) throw DomainError("Rng::uniform_int: empty range");
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo) + 1));
  }

  // [0, 1)
  double uniform_real() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform_real(double lo, double hi) {
    return lo + (hi - lo) * uniform_real();
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

// ---------------------------------------------------------------------------
// Core value types shared between environments, estimators and the engine.

enum class Status : uint8_t { Alive = 0, Dead = 1 };

enum class EnvKind : uint8_t { TrapTree = 1, KeyCorridor = 2, Chain = 3 };

inline const char* env_kind_name(EnvKind k) {
  switch (k) {
    case EnvKind::TrapTree: return "trap_tree";
    case EnvKind::KeyCorridor: return "key_corridor";
    case EnvKind::Chain: return "chain";
  }
  return "unknown";
}

struct Action {
  int index = 0;
};

// Canonical state proxy. The hash is a pure function of the bytes; equal
// states produce byte-identical observations.
struct Observation {
  std::vector<uint8_t> bytes;
  uint64_t hash = 0;

  static Observation from_bytes(std::vector<uint8_t> b) {
    Observation o;
    o.hash = fnv1a64(b);
    o.bytes = std::move(b);
    return o;
  }

  bool operator==(const Observation& other) const {
    return hash == other.hash && bytes == other.bytes;
  }
};

// Opaque environment checkpoint. The blob starts with a 4-byte magic and a
// 1-byte version; everything after is environment-specific.
struct Snapshot {
  EnvKind env_kind = EnvKind::Chain;
  std::vector<uint8_t> blob;

  bool operator==(const Snapshot& other) const {
    return env_kind == other.env_kind && blob == other.blob;
  }
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  Status status = Status::Alive;
};

// ---------------------------------------------------------------------------
// Little-endian byte IO used by snapshots, wire messages and file containers.

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { append(&v, 2); }
  void u32(uint32_t v) { append(&v, 4); }
  void u64(uint64_t v) { append(&v, 8); }
  void f64(double v) { append(&v, 8); }
  void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void sized_bytes(std::span<const uint8_t> b) {
    u32(static_cast<uint32_t>(b.size()));
    bytes(b);
  }
  void magic(const char tag[4]) {
    buf_.insert(buf_.end(), tag, tag + 4);
  }

  std::vector<uint8_t> take() { return std::move(buf_); }
  const std::vector<uint8_t>& data() const { return buf_; }

 private:
  void append(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);  // little-endian hosts only
  }
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8() { return take(1)[0]; }
  uint16_t u16() { uint16_t v; std::memcpy(&v, take(2).data(), 2); return v; }
  uint32_t u32() { uint32_t v; std::memcpy(&v, take(4).data(), 4); return v; }
  uint64_t u64() { uint64_t v; std::memcpy(&v, take(8).data(), 8); return v; }
  double f64() { double v; std::memcpy(&v, take(8).data(), 8); return v; }

  std::vector<uint8_t> sized_bytes() {
    uint32_t n = u32();
    auto s = take(n);
    return std::vector<uint8_t>(s.begin(), s.end());
  }

  void expect_magic(const char tag[4], const std::string& what) {
    auto s = take(4);
    if (std::memcmp(s.data(), tag, 4) != 0)
      throw DecodeError(what + ": bad magic");
  }

  bool at_end() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const uint8_t> take(size_t n) {
    if (data_.size() - pos_ < n)
      throw DecodeError("truncated payload: need " + std::to_string(n) +
                        " bytes, have " + std::to_string(data_.size() - pos_));
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace gowu
