#include <algorithm>
#include <memory>

#include "gowu/env.hpp"

namespace gowu {
namespace {

constexpr char kMagic[4] = {'C', 'H', 'M', 'D'};
constexpr uint8_t kVersion = 1;

class ChainEnv final : public Env {
 public:
  explicit ChainEnv(const ChainConfig& cfg) : cfg_(cfg) {
    if (cfg.length < 1)
      throw ConfigError("chain: length must be >= 1");
  }

  EnvKind kind() const override { return EnvKind::Chain; }

  int arity() const override { return pos_ == cfg_.length ? 0 : 2; }

  Status status() const override { return Status::Alive; }

  Observation observe() const override {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(pos_));
    return Observation::from_bytes(w.take());
  }

  StepResult step(Action a) override {
    if (a.index < 0 || a.index >= arity())
      throw ActionOutOfRange("chain: action " + std::to_string(a.index) +
                             " out of range [0, " + std::to_string(arity()) + ")");
    pos_ = (a.index == 1) ? pos_ + 1 : std::max(0, pos_ - 1);
    StepResult r;
    r.reward = (pos_ == cfg_.length) ? 1.0 : 0.0;
    r.status = Status::Alive;
    r.observation = observe();
    return r;
  }

  Snapshot snapshot() const override {
    ByteWriter w;
    w.magic(kMagic);
    w.u8(kVersion);
    w.u32(static_cast<uint32_t>(cfg_.length));
    w.u32(static_cast<uint32_t>(pos_));
    return Snapshot{EnvKind::Chain, w.take()};
  }

  void restore(const Snapshot& s) override {
    if (s.env_kind != EnvKind::Chain)
      throw KindMismatch("chain: snapshot is for " + std::string(env_kind_name(s.env_kind)));
    try {
      ByteReader r(s.blob);
      r.expect_magic(kMagic, "chain snapshot");
      if (r.u8() != kVersion) throw DecodeError("chain snapshot: unsupported version");
      uint32_t len = r.u32();
      if (len != static_cast<uint32_t>(cfg_.length))
        throw KindMismatch("chain: snapshot taken at length " + std::to_string(len) +
                           ", instance has length " + std::to_string(cfg_.length));
      uint32_t pos = r.u32();
      if (!r.at_end()) throw DecodeError("chain snapshot: trailing bytes");
      if (pos > static_cast<uint32_t>(cfg_.length))
        throw DecodeError("chain snapshot: position outside the chain");
      pos_ = static_cast<int>(pos);
    } catch (const DecodeError& e) {
      throw CorruptSnapshot(e.what());
    }
  }

  uint64_t config_digest() const override {
    return derive_stream({static_cast<uint64_t>(EnvKind::Chain),
                          static_cast<uint64_t>(cfg_.length)});
  }

  std::unique_ptr<Env> fork_deterministic() const override {
    auto fresh = std::make_unique<ChainEnv>(cfg_);
    fresh->pos_ = pos_;
    return fresh;
  }

 private:
  ChainConfig cfg_;
  int pos_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_chain(const ChainConfig& cfg) {
  return std::make_unique<ChainEnv>(cfg);
}

}  // namespace gowu
