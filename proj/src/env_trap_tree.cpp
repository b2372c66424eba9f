#include <memory>

#include "gowu/env.hpp"
#include "gowu/trap_structure.hpp"

namespace gowu {
namespace {

constexpr char kMagic[4] = {'T', 'T', 'R', 'E'};
constexpr uint8_t kVersion = 1;

enum class Role : uint8_t { Spine, SpineLast, Goal, TrapInternal, TrapLeaf };

class TrapTreeEnv final : public Env {
 public:
  explicit TrapTreeEnv(const TrapTreeConfig& cfg) : cfg_(cfg) {
    if (cfg.depth < 2)
      throw InvalidDepth("trap tree depth must be >= 2, got " + std::to_string(cfg.depth));
    reset_to_root();
  }

  EnvKind kind() const override { return EnvKind::TrapTree; }

  int arity() const override {
    switch (role_) {
      case Role::Spine: return 2;
      case Role::SpineLast: return 1;
      case Role::TrapInternal: return 6;
      case Role::Goal:
      case Role::TrapLeaf: return 0;
    }
    return 0;
  }

  Status status() const override { return status_; }

  Observation observe() const override { return Observation::from_bytes(path_); }

  StepResult step(Action a) override {
    if (status_ == Status::Dead)
      throw DeadEnvironment("trap tree: step on a dead walker");
    int ar = arity();
    if (a.index < 0 || a.index >= ar)
      throw ActionOutOfRange("trap tree: action " + std::to_string(a.index) +
                             " out of range [0, " + std::to_string(ar) + ")");
    const int D = cfg_.depth;
    const int child_depth = static_cast<int>(path_.size()) + 1;
    Role next;
    switch (role_) {
      case Role::Spine:
        if (a.index == trap::spine_child_slot(D, static_cast<int>(path_.size()))) {
          next = (child_depth <= D - 1) ? Role::Spine : Role::SpineLast;
        } else {
          next = trap::trap_node_internal(child_depth, D) ? Role::TrapInternal
                                                          : Role::TrapLeaf;
        }
        break;
      case Role::SpineLast:
        next = Role::Goal;
        break;
      case Role::TrapInternal: {
        auto [s0, s1] = trap::internal_child_slots(path_hash_);
        bool internal = trap::children_have_internal(static_cast<int>(path_.size()), D) &&
                        (a.index == s0 || a.index == s1);
        next = internal ? Role::TrapInternal : Role::TrapLeaf;
        break;
      }
      default:
        throw ActionOutOfRange("trap tree: no actions at a leaf");
    }
    push(static_cast<uint8_t>(a.index), next);
    StepResult r;
    r.reward = (next == Role::Goal) ? 1.0 : 0.0;
    r.status = status_;
    r.observation = observe();
    return r;
  }

  Snapshot snapshot() const override {
    ByteWriter w;
    w.magic(kMagic);
    w.u8(kVersion);
    w.u32(static_cast<uint32_t>(cfg_.depth));
    w.u8(static_cast<uint8_t>(status_));
    w.sized_bytes(path_);
    return Snapshot{EnvKind::TrapTree, w.take()};
  }

  void restore(const Snapshot& s) override {
    if (s.env_kind != EnvKind::TrapTree)
      throw KindMismatch("trap tree: snapshot is for " + std::string(env_kind_name(s.env_kind)));
    try {
      ByteReader r(s.blob);
      r.expect_magic(kMagic, "trap tree snapshot");
      if (r.u8() != kVersion) throw DecodeError("trap tree snapshot: unsupported version");
      uint32_t depth = r.u32();
      if (depth != static_cast<uint32_t>(cfg_.depth))
        throw KindMismatch("trap tree: snapshot taken at depth " + std::to_string(depth) +
                           ", instance has depth " + std::to_string(cfg_.depth));
      auto stored_status = static_cast<Status>(r.u8());
      auto path = r.sized_bytes();
      if (!r.at_end()) throw DecodeError("trap tree snapshot: trailing bytes");
      replay_path(path, stored_status);
    } catch (const DecodeError& e) {
      throw CorruptSnapshot(e.what());
    }
  }

  uint64_t config_digest() const override {
    return derive_stream({static_cast<uint64_t>(EnvKind::TrapTree),
                          static_cast<uint64_t>(cfg_.depth)});
  }

  std::unique_ptr<Env> fork_deterministic() const override {
    auto fresh = std::make_unique<TrapTreeEnv>(cfg_);
    fresh->restore(snapshot());
    return fresh;
  }

 private:
  void reset_to_root() {
    path_.clear();
    path_hash_ = fnv1a64(path_);
    role_ = Role::Spine;
    status_ = Status::Alive;
  }

  void push(uint8_t slot, Role next) {
    path_.push_back(slot);
    path_hash_ = fnv1a64(std::span<const uint8_t>(&slot, 1), path_hash_);
    role_ = next;
    status_ = (next == Role::TrapLeaf) ? Status::Dead : Status::Alive;
  }

  // Rebuilds the derived role by walking the stored path through the tree
  // rules; any transition a live walker could not have made marks the blob
  // corrupt.
  void replay_path(const std::vector<uint8_t>& path, Status stored_status) {
    reset_to_root();
    for (uint8_t slot : path) {
      if (status_ == Status::Dead || slot >= static_cast<uint8_t>(arity()))
        throw DecodeError("trap tree snapshot: path leaves the tree");
      step(Action{static_cast<int>(slot)});
    }
    if (status_ != stored_status)
      throw DecodeError("trap tree snapshot: stored status contradicts path");
  }

  TrapTreeConfig cfg_;
  std::vector<uint8_t> path_;
  uint64_t path_hash_ = 0;
  Role role_ = Role::Spine;
  Status status_ = Status::Alive;
};

}  // namespace

std::unique_ptr<Env> make_trap_tree(const TrapTreeConfig& cfg) {
  return std::make_unique<TrapTreeEnv>(cfg);
}

}  // namespace gowu
