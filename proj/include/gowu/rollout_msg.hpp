#pragma once

#include <vector>

#include "gowu/common.hpp"
#include "gowu/policy.hpp"

namespace gowu {

// Result of one inner-steps rollout. The end state reflects the environment
// after the last executed step, whether or not the walker survived it.
struct RolloutOutcome {
  int steps_taken = 0;
  double reward_delta = 0.0;
  Status final_status = Status::Alive;
  Snapshot end_snapshot;
  Observation end_observation;
  std::vector<Observation> observations_seen;  // one per executed step
};

// Work order for one rollout. Fully determines the rollout: the worker
// restores the checkpoint, seeds its RNG from rng_stream_key, and plays
// step_budget steps at most. group_index is 1-based; member_index is the
// particle's index within its group.
struct RolloutRequest {
  uint64_t request_id = 0;
  uint32_t group_index = 1;
  uint32_t member_index = 0;
  uint32_t step_budget = 0;
  uint64_t rng_stream_key = 0;
  PolicyConfig policy;
  Snapshot start;
};

struct RolloutResponse {
  uint64_t request_id = 0;
  RolloutOutcome outcome;
};

// Barrier-style rollout executor. run_batch returns outcomes in request
// order; implementations may execute them in any order or in parallel, but
// every outcome must be a pure function of its request.
class RolloutBackend {
 public:
  virtual ~RolloutBackend() = default;
  virtual std::vector<RolloutResponse> run_batch(const std::vector<RolloutRequest>& requests) = 0;
  // True when the backend feeds the shared estimator during the rollout
  // itself; otherwise the coordinator ingests observations_seen afterwards.
  virtual bool applies_estimator_updates() const = 0;
};

}  // namespace gowu
