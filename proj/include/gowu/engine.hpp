#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "gowu/env.hpp"
#include "gowu/lineage.hpp"
#include "gowu/rollout_msg.hpp"
#include "gowu/uncertainty.hpp"

namespace gowu {

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct EngineConfig {
  int groups = 4;                // M
  int particles_per_group = 32;  // N
  IntRange outer_steps{10, 20};  // rollout rounds per group evolution
  IntRange inner_steps{5, 15};   // step budget per rollout
  IntRange rollback{1, 3};       // ancestor distance after group extinction
  int iterations = 100;
  uint64_t frames_budget = 0;  // 0 = unlimited; checked between iterations
  uint64_t master_seed = 1;
  PolicyConfig policy{};
  EstimatorConfig estimator{};
  bool consolidation_enabled = true;
  // When false, the novelty component of winner selection is replaced by an
  // RNG draw, i.e. winners are picked uniformly among reward-maximal
  // candidates.
  bool uncertainty_winner_enabled = true;
  // When false, one value each of outer_steps/inner_steps/rollback is drawn
  // at run start and reused for the whole run.
  bool randomize_per_iteration = true;
  bool shared_estimator = true;  // false: one estimator per group (ablation)
  size_t node_cap = 10'000'000;
};

struct Particle {
  int id = 0;  // index within its group
  NodeId node = kNoNode;
  Snapshot snapshot;
  Observation observation;
  double cum_reward = 0.0;
  Status status = Status::Alive;
};

// Plays up to step_budget steps from the particle's current state. The
// environment must already be restored to that state. Starts a fresh action
// block, feeds every observation to the estimator when one is given, and
// stops early on death, on any strict reward increase (which does not kill
// the walker), or when the state runs out of actions. Applies the outcome to
// the particle: survivors adopt the end state and reward; a dying walker only
// flips its status, keeping its last live anchor.
RolloutOutcome rollout(Particle& p, int step_budget, const PolicyConfig& policy,
                       UncertaintyEstimator* estimator, Env& env, Rng& rng);

// Outcome application shared by the direct path and the wire path.
void apply_outcome(Particle& p, const RolloutOutcome& out);

// Index of the lex-greatest (primary, secondary) pair: primary decides,
// secondary breaks ties, remaining ties go to the lowest index.
size_t lex_winner(const std::vector<std::pair<double, double>>& scored);

// Lex-argmax of (cum_reward, estimator score) over particles. With
// alive_only, Dead particles are excluded; throws NoCandidates when nothing
// qualifies.
int select_winner(const std::vector<Particle>& particles,
                  const UncertaintyEstimator& estimator, bool alive_only);

// ---------------------------------------------------------------------------

struct RunReport {
  struct IterationStat {
    int iteration = 0;
    uint64_t frames = 0;
    double global_best_reward = 0.0;
    uint64_t tree_nodes = 0;
    int groups_reset = 0;
    int rollbacks = 0;
    uint64_t prunes = 0;
    int winner_group = 0;  // 1-based group that produced the global winner
  };
  struct TreeStats {
    uint64_t nodes = 0;
    uint64_t total_added = 0;
    uint64_t total_pruned = 0;
    int max_depth = 0;
  };

  uint64_t frames_consumed = 0;
  int iterations_run = 0;
  // (frames, reward) at every strict improvement of the running best reward,
  // starting at (0, 0); non-decreasing in both components.
  std::vector<std::pair<uint64_t, double>> best_reward_curve;
  std::vector<IterationStat> winner_history;
  TreeStats final_tree_stats;

  // Deterministic serialization used for byte-equality comparisons.
  std::string to_json() const;
  // First frame count at which the running best reached `threshold`; empty
  // when the run never got there.
  std::optional<uint64_t> frames_to_reach(double threshold) const;
};

// Hooks for invariant checks; every callback may be empty.
struct EngineProbe {
  // After each outer step's redistribution (post-rollback or post-reset).
  std::function<void(int group, const std::vector<Particle>&)> after_redistribution;
  // After group consolidation (or where it would happen when disabled).
  std::function<void(int group, const std::vector<Particle>&, int winner_idx)> after_consolidation;
  // After the global winner update: scored (reward, tiebreak) candidates in
  // order (group winners 1..M, then the previous global winner) and the pick.
  std::function<void(const std::vector<std::pair<double, double>>&, size_t chosen)> after_global_sync;
};

using EnvFactory = std::function<std::unique_ptr<Env>()>;

// Particle-tree exploration driver. Keeps M groups of N particles anchored
// on a shared lineage tree, evolves each group through rollout rounds, and
// maintains a global winner that lagging groups are reset onto. The global
// winner holds one occupancy slot on its node so the lineage it anchors
// survives pruning.
class Engine {
 public:
  Engine(EngineConfig cfg, EnvFactory factory, RolloutBackend* backend = nullptr,
         EngineProbe* probe = nullptr);
  ~Engine();

  RunReport run();

  const LineageTree& tree() const { return tree_; }
  const EngineConfig& config() const { return cfg_; }
  UncertaintyEstimator& estimator_for_group(int group);  // 1-based
  Demonstration best_demonstration() const;

 private:
  struct WinnerRecord {
    NodeId node = kNoNode;
    Snapshot snapshot;
    Observation observation;
    double cum_reward = 0.0;
    int origin_group = 1;
  };
  struct FixedDraws {
    int outer = 0;
    int inner = 0;
    int rollback = 0;
  };

  void init_population();
  WinnerRecord evolve_group(int g, int iteration, RunReport& report,
                            RunReport::IterationStat& stat);
  void move_particle(Particle& p, NodeId target);
  void reset_particle_to(Particle& p, const WinnerRecord& w);
  int pick_winner(const std::vector<Particle>& ps, int g, bool alive_only, Rng& tie_rng);
  double winner_tiebreak(const Particle& p, int g, Rng& tie_rng);
  void note_reward(double reward, RunReport& report);

  EngineConfig cfg_;
  EnvFactory factory_;
  std::unique_ptr<Env> probe_env_;  // for root snapshot and metadata
  LineageTree tree_;
  std::vector<std::unique_ptr<UncertaintyEstimator>> estimators_;  // 1 or M
  std::vector<std::vector<Particle>> groups_;
  WinnerRecord global_;
  RolloutBackend* backend_;
  std::unique_ptr<RolloutBackend> owned_backend_;
  EngineProbe* probe_;
  FixedDraws fixed_;
  uint64_t frames_ = 0;
  uint64_t next_request_id_ = 1;
  double running_best_ = 0.0;
};

// In-process executor: runs each request immediately on a private
// environment instance and feeds the estimator during the rollout.
class DirectBackend final : public RolloutBackend {
 public:
  DirectBackend(EnvFactory factory,
                std::function<UncertaintyEstimator*(uint32_t group)> estimator_resolver);
  std::vector<RolloutResponse> run_batch(const std::vector<RolloutRequest>& requests) override;
  bool applies_estimator_updates() const override { return true; }

 private:
  std::unique_ptr<Env> env_;
  std::function<UncertaintyEstimator*(uint32_t)> resolve_;
};

}  // namespace gowu
