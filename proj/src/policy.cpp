#include "gowu/policy.hpp"

namespace gowu {

PolicyBlockState begin_block(const PolicyConfig& policy, int arity_hint, Rng& rng) {
  if (arity_hint < 1)
    throw DomainError("begin_block: arity_hint must be >= 1");
  PolicyBlockState block;
  if (policy.kind == PolicyKind::BlockFixed)
    block.held_action = rng.uniform_int(0, arity_hint - 1);
  return block;
}

Action act(const PolicyConfig& policy, PolicyBlockState& block, int arity, Rng& rng) {
  if (arity < 1)
    throw NoCandidates("act: no legal actions at this state");
  if (policy.kind == PolicyKind::Uniform)
    return Action{rng.uniform_int(0, arity - 1)};

  if (!block.held_action.has_value())
    throw DomainError("act: block-fixed policy used without begin_block");
  if (rng.uniform_real() < policy.epsilon)
    return Action{rng.uniform_int(0, arity - 1)};
  if (*block.held_action >= arity)
    block.held_action = rng.uniform_int(0, arity - 1);
  return Action{*block.held_action};
}

}  // namespace gowu
