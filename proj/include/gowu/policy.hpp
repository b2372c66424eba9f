#pragma once

#include <optional>

#include "gowu/common.hpp"

namespace gowu {

enum class PolicyKind : uint8_t { Uniform = 0, BlockFixed = 1 };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::BlockFixed;
  // BlockFixed: probability of overriding the held action with a fresh
  // uniform draw at each step.
  double epsilon = 0.2;
};

// Per-rollout actuator state. The held action is resampled at every
// begin_block call and lives for the duration of one inner-steps block.
struct PolicyBlockState {
  std::optional<int> held_action;
};

// Starts a new action block. arity_hint must be >= 1.
PolicyBlockState begin_block(const PolicyConfig& policy, int arity_hint, Rng& rng);

// Draws the next action. Uniform ignores the block state; BlockFixed plays
// the held action with probability 1-epsilon (re-drawing and re-holding it
// first if the current arity no longer admits it) and a fresh uniform draw
// otherwise.
Action act(const PolicyConfig& policy, PolicyBlockState& block, int arity, Rng& rng);

}  // namespace gowu
