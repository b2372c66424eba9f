#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "gowu/engine.hpp"
#include "gowu/env.hpp"
#include "gowu/lineage.hpp"

namespace gowu {

struct CurriculumConfig {
  int k_max = 10;       // segments cap; 1 treats the whole demo as one segment
  int window = 25;      // start-sampling window, in checkpoints
  double s_req = 0.2;   // windowed success rate required to make things harder
  double s_req_begin = 0.95;  // success rate required at the very beginning
  int n_update = 32;          // outcomes per window decision
  double dec_lo = 0.25;       // regression step ~ Unif[dec_lo, dec_hi] * window
  double dec_hi = 0.75;
  double inc_lo = 0.5;  // simplification step ~ Unif[inc_lo, inc_hi] * window
  double inc_hi = 1.0;
  double eps_tol = 0.0;    // slack subtracted from the demonstration target
  double ema_alpha = 0.9;  // weight kept by the running success-length mean
  double mu = 2.0;         // episode step cap = ceil(mu * L_bar) + base_budget
  int base_budget = 500;
  uint64_t max_episodes = 200'000;  // global training cap across all segments
  int eval_episodes = 100;          // final from-the-start evaluations per segment
  // When true, episodes whose sampled start is checkpoint 0 run on a freshly
  // built environment (new layout seed) instead of the recorded checkpoint.
  bool clean_reset_at_zero = false;

  void validate() const;
};

// One reward-bounded slice of a demonstration. The window may regress all the
// way to checkpoint 0, so the cumulative rewards for every checkpoint up to
// the boundary ride along.
struct Segment {
  int demo_index = 0;
  int index = 0;       // position among the demo's segments
  uint32_t t_end = 0;  // checkpoint index of the reward boundary
  std::vector<double> cum_reward;  // demo cumulative reward, checkpoints 0..t_end

  // Demonstration reward collected between checkpoint t and the boundary.
  double target_from(uint32_t t) const;
};

// Splits a demonstration at its reward events, evenly downsampled to at most
// k_max boundaries (the last event is always kept). Throws NoRewardEvents
// when the demonstration never collects a reward.
std::vector<Segment> segment(const Demonstration& demo, int k_max, int demo_index = 0);

struct CurriculumState {
  uint32_t t_curr = 0;
  std::vector<uint8_t> success_buffer;  // current window's outcomes, 0/1
  double l_bar = 0.0;                   // EMA of successful episode lengths
  bool l_bar_seeded = false;
  bool complete = false;
};

// Uniform start checkpoint in [max(0, t_curr - window), t_curr].
uint32_t sample_start(const CurriculumState& st, int window, Rng& rng);

// Per-episode step cap: base_budget until the first success seeds the EMA,
// ceil(mu * L_bar) + base_budget afterwards.
uint64_t episode_budget(const CurriculumState& st, double mu, int base_budget);

// A window decision: emitted whenever the success buffer filled up and the
// window moved (or the segment completed).
struct WindowMove {
  int demo_index = 0;
  int segment_index = 0;
  uint64_t episode = 0;  // global episode count at the decision
  uint32_t t_before = 0;
  uint32_t t_after = 0;
  double success_rate = 0.0;
  bool completed = false;
};

// Scores one episode against the segment target and, once n_update outcomes
// accumulated, decides the window move: success rate >= s_req regresses the
// start backwards, anything less simplifies it forwards (capped at the
// boundary); at checkpoint 0 a rate >= s_req_begin completes the segment.
// The buffer is cleared after every decision. demo_index/segment_index/
// episode in the returned record are left for the caller to fill.
std::optional<WindowMove> record(CurriculumState& st, const CurriculumConfig& cfg,
                                 uint32_t t_start, double r_agent,
                                 uint64_t rollout_len, const Segment& seg, Rng& rng);

// ---------------------------------------------------------------------------
// Learner contract

struct Transition {
  Observation obs;
  int action = 0;
  double reward = 0.0;
  Observation next_obs;
  int next_arity = 0;     // 0 when the next state is terminal
  bool terminal = false;  // death or out-of-actions
};
using Trajectory = std::vector<Transition>;

class Learner {
 public:
  virtual ~Learner() = default;
  virtual Action act(const Observation& obs, int arity, Rng& rng) = 0;
  virtual Action act_greedy(const Observation& obs, int arity) = 0;
  virtual void learn(const Trajectory& trajectory) = 0;
};

// Reference learner: one-step Q-learning over observation hashes with
// epsilon-greedy exploration. Greedy ties go to the lowest action index.
class TabularQLearner final : public Learner {
 public:
  explicit TabularQLearner(double learning_rate = 0.1, double discount = 0.99,
                           double epsilon = 0.1);

  Action act(const Observation& obs, int arity, Rng& rng) override;
  Action act_greedy(const Observation& obs, int arity) override;
  void learn(const Trajectory& trajectory) override;

  size_t states() const { return q_.size(); }
  std::vector<uint8_t> to_bytes() const;
  static TabularQLearner from_bytes(std::span<const uint8_t> data);

 private:
  std::vector<double>& row(uint64_t key, int arity);
  int argmax(const std::vector<double>& q, int arity) const;

  double lr_;
  double gamma_;
  double eps_;
  std::unordered_map<uint64_t, std::vector<double>> q_;
};

// ---------------------------------------------------------------------------
// Distillation driver

using EnvSeedFactory = std::function<std::unique_ptr<Env>(uint64_t layout_seed)>;

struct DistillReport {
  int segments_total = 0;
  int segments_solved = 0;
  uint64_t episodes_used = 0;
  bool budget_exhausted = false;
  double final_success_rate = 0.0;  // mean over segments of the final eval
  std::vector<double> per_segment_success;
  std::vector<WindowMove> moves;
};

// Trains the learner over every demonstration's segments, round-robin over
// the ones not yet complete, restoring episode starts from demonstration
// checkpoints. Ends when all segments complete or cfg.max_episodes training
// episodes ran (reported, not thrown). The final evaluation plays
// cfg.eval_episodes greedy episodes per segment from checkpoint 0.
// clean_reset_factory is only consulted when cfg.clean_reset_at_zero is set.
DistillReport run_distillation(const std::vector<Demonstration>& demos,
                               EnvFactory env_factory, Learner& learner,
                               const CurriculumConfig& cfg, uint64_t seed,
                               EnvSeedFactory clean_reset_factory = nullptr);

// Dense demonstration: replays `actions` from the environment's current
// state, recording one checkpoint per step (plus the start).
Demonstration demo_from_actions(Env& env, std::span<const Action> actions);

}  // namespace gowu
