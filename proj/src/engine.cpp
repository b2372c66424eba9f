#include "gowu/engine.hpp"

#include <algorithm>
#include <charconv>

namespace gowu {

// Stream tags keeping every RNG consumer on its own counter-derived seed, so
// results do not depend on scheduling or on draws made by unrelated code.
namespace stream {
constexpr uint64_t kOuterDraw = 1;
constexpr uint64_t kInnerDraw = 2;
constexpr uint64_t kRollout = 3;
constexpr uint64_t kRollback = 4;
constexpr uint64_t kWinner = 5;
constexpr uint64_t kConsolidation = 6;
constexpr uint64_t kGlobal = 7;
constexpr uint64_t kFixed = 8;
}  // namespace stream

RolloutOutcome rollout(Particle& p, int step_budget, const PolicyConfig& policy,
                       UncertaintyEstimator* estimator, Env& env, Rng& rng) {
  RolloutOutcome out;
  out.end_snapshot = p.snapshot;
  out.end_observation = p.observation;
  PolicyBlockState block;
  bool block_started = false;
  for (int t = 0; t < step_budget; ++t) {
    int ar = env.arity();
    if (ar == 0) break;  // live terminal state: nothing left to do
    if (!block_started) {
      block = begin_block(policy, ar, rng);
      block_started = true;
    }
    Action a = act(policy, block, ar, rng);
    StepResult res = env.step(a);
    ++out.steps_taken;
    out.observations_seen.push_back(res.observation);
    if (estimator)
      estimator->update(std::span<const Observation>(&out.observations_seen.back(), 1));
    out.reward_delta += res.reward;
    out.end_snapshot = env.snapshot();
    out.end_observation = std::move(res.observation);
    if (res.status == Status::Dead) {
      out.final_status = Status::Dead;
      break;
    }
    if (res.reward > 0.0) break;  // halt on reward; the walker stays alive
  }
  apply_outcome(p, out);
  return out;
}

void apply_outcome(Particle& p, const RolloutOutcome& out) {
  if (out.final_status == Status::Dead) {
    // Keep the last live anchor: node, snapshot and reward stay put.
    p.status = Status::Dead;
    return;
  }
  p.snapshot = out.end_snapshot;
  p.observation = out.end_observation;
  p.cum_reward += out.reward_delta;
  p.status = Status::Alive;
}

size_t lex_winner(const std::vector<std::pair<double, double>>& scored) {
  if (scored.empty()) throw NoCandidates("lex_winner: empty candidate set");
  size_t best = 0;
  for (size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].first > scored[best].first ||
        (scored[i].first == scored[best].first && scored[i].second > scored[best].second))
      best = i;
  }
  return best;
}

int select_winner(const std::vector<Particle>& particles,
                  const UncertaintyEstimator& estimator, bool alive_only) {
  std::vector<std::pair<double, double>> scored;
  std::vector<int> index;
  for (int i = 0; i < static_cast<int>(particles.size()); ++i) {
    const Particle& p = particles[i];
    if (alive_only && p.status != Status::Alive) continue;
    scored.emplace_back(p.cum_reward, estimator.score(p.observation));
    index.push_back(i);
  }
  if (scored.empty()) throw NoCandidates("select_winner: no live candidates");
  return index[lex_winner(scored)];
}

// ---------------------------------------------------------------------------

namespace {

void json_number(std::string& s, uint64_t v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, p);
}

void json_number(std::string& s, int v) {
  char buf[16];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, p);
}

void json_number(std::string& s, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, p);
}

}  // namespace

std::string RunReport::to_json() const {
  std::string s;
  s += "{\"frames_consumed\":";
  json_number(s, frames_consumed);
  s += ",\"iterations_run\":";
  json_number(s, iterations_run);
  s += ",\"best_reward_curve\":[";
  for (size_t i = 0; i < best_reward_curve.size(); ++i) {
    if (i) s += ',';
    s += '[';
    json_number(s, best_reward_curve[i].first);
    s += ',';
    json_number(s, best_reward_curve[i].second);
    s += ']';
  }
  s += "],\"winner_history\":[";
  for (size_t i = 0; i < winner_history.size(); ++i) {
    const auto& h = winner_history[i];
    if (i) s += ',';
    s += "{\"iteration\":";
    json_number(s, h.iteration);
    s += ",\"frames\":";
    json_number(s, h.frames);
    s += ",\"global_best_reward\":";
    json_number(s, h.global_best_reward);
    s += ",\"tree_nodes\":";
    json_number(s, h.tree_nodes);
    s += ",\"groups_reset\":";
    json_number(s, h.groups_reset);
    s += ",\"rollbacks\":";
    json_number(s, h.rollbacks);
    s += ",\"prunes\":";
    json_number(s, h.prunes);
    s += ",\"winner_group\":";
    json_number(s, h.winner_group);
    s += '}';
  }
  s += "],\"final_tree_stats\":{\"nodes\":";
  json_number(s, final_tree_stats.nodes);
  s += ",\"total_added\":";
  json_number(s, final_tree_stats.total_added);
  s += ",\"total_pruned\":";
  json_number(s, final_tree_stats.total_pruned);
  s += ",\"max_depth\":";
  json_number(s, final_tree_stats.max_depth);
  s += "}}";
  return s;
}

std::optional<uint64_t> RunReport::frames_to_reach(double threshold) const {
  for (const auto& [frames, reward] : best_reward_curve)
    if (reward >= threshold) return frames;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

DirectBackend::DirectBackend(EnvFactory factory,
                             std::function<UncertaintyEstimator*(uint32_t)> estimator_resolver)
    : env_(factory()), resolve_(std::move(estimator_resolver)) {}

std::vector<RolloutResponse> DirectBackend::run_batch(
    const std::vector<RolloutRequest>& requests) {
  std::vector<RolloutResponse> responses;
  responses.reserve(requests.size());
  for (const auto& req : requests) {
    env_->restore(req.start);
    Particle scratch;
    scratch.snapshot = req.start;
    scratch.observation = env_->observe();
    Rng rng(req.rng_stream_key);
    UncertaintyEstimator* est = resolve_ ? resolve_(req.group_index) : nullptr;
    RolloutResponse resp;
    resp.request_id = req.request_id;
    resp.outcome = rollout(scratch, static_cast<int>(req.step_budget), req.policy,
                           est, *env_, rng);
    responses.push_back(std::move(resp));
  }
  return responses;
}

// ---------------------------------------------------------------------------

Engine::Engine(EngineConfig cfg, EnvFactory factory, RolloutBackend* backend,
               EngineProbe* probe)
    : cfg_(std::move(cfg)),
      factory_(std::move(factory)),
      probe_env_(factory_()),
      tree_(probe_env_->snapshot(), probe_env_->observe(), cfg_.node_cap),
      backend_(backend),
      probe_(probe) {
  if (cfg_.groups < 1 || cfg_.particles_per_group < 1)
    throw ConfigError("engine: groups and particles_per_group must be >= 1");
  auto check_range = [](const IntRange& r, const char* name, int min_lo) {
    if (r.lo < min_lo || r.hi < r.lo)
      throw ConfigError(std::string("engine: bad range for ") + name);
  };
  check_range(cfg_.outer_steps, "outer_steps", 1);
  check_range(cfg_.inner_steps, "inner_steps", 0);
  check_range(cfg_.rollback, "rollback", 1);
  if (cfg_.iterations < 0) throw ConfigError("engine: iterations must be >= 0");

  int n_estimators = cfg_.shared_estimator ? 1 : cfg_.groups;
  for (int i = 0; i < n_estimators; ++i)
    estimators_.push_back(make_estimator(cfg_.estimator));

  if (!backend_) {
    owned_backend_ = std::make_unique<DirectBackend>(
        factory_, [this](uint32_t g) { return &estimator_for_group(static_cast<int>(g)); });
    backend_ = owned_backend_.get();
  }

  Rng fixed_rng(derive_stream({cfg_.master_seed, stream::kFixed}));
  fixed_.outer = fixed_rng.uniform_int(cfg_.outer_steps.lo, cfg_.outer_steps.hi);
  fixed_.inner = fixed_rng.uniform_int(cfg_.inner_steps.lo, cfg_.inner_steps.hi);
  fixed_.rollback = fixed_rng.uniform_int(cfg_.rollback.lo, cfg_.rollback.hi);

  init_population();
}

Engine::~Engine() = default;

UncertaintyEstimator& Engine::estimator_for_group(int group) {
  if (group < 1 || group > cfg_.groups)
    throw DomainError("engine: group index out of range");
  return cfg_.shared_estimator ? *estimators_[0] : *estimators_[group - 1];
}

Demonstration Engine::best_demonstration() const {
  return build_demonstration(tree_, probe_env_->kind(), probe_env_->config_digest());
}

void Engine::init_population() {
  const TreeNode& root = tree_.node(tree_.root());
  groups_.resize(cfg_.groups);
  for (int g = 0; g < cfg_.groups; ++g) {
    groups_[g].resize(cfg_.particles_per_group);
    for (int i = 0; i < cfg_.particles_per_group; ++i) {
      Particle& p = groups_[g][i];
      p.id = i;
      p.node = tree_.root();
      p.snapshot = root.snapshot;
      p.observation = root.observation;
      p.cum_reward = 0.0;
      p.status = Status::Alive;
      tree_.set_occupancy(p.node, +1);
    }
  }
  global_.node = tree_.root();
  global_.snapshot = root.snapshot;
  global_.observation = root.observation;
  global_.cum_reward = 0.0;
  global_.origin_group = 1;
  tree_.set_occupancy(global_.node, +1);  // the winner's anchor survives pruning
}

void Engine::move_particle(Particle& p, NodeId target) {
  tree_.set_occupancy(p.node, -1);
  tree_.set_occupancy(target, +1);
  p.node = target;
}

void Engine::reset_particle_to(Particle& p, const WinnerRecord& w) {
  move_particle(p, w.node);
  p.snapshot = w.snapshot;
  p.observation = w.observation;
  p.cum_reward = w.cum_reward;
  p.status = Status::Alive;
}

double Engine::winner_tiebreak(const Particle& p, int g, Rng& tie_rng) {
  if (cfg_.uncertainty_winner_enabled)
    return estimator_for_group(g).score(p.observation);
  return tie_rng.uniform_real();
}

int Engine::pick_winner(const std::vector<Particle>& ps, int g, bool alive_only,
                        Rng& tie_rng) {
  std::vector<std::pair<double, double>> scored;
  std::vector<int> index;
  for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
    if (alive_only && ps[i].status != Status::Alive) continue;
    scored.emplace_back(ps[i].cum_reward, winner_tiebreak(ps[i], g, tie_rng));
    index.push_back(i);
  }
  if (scored.empty()) throw NoCandidates("engine: no live winner candidate");
  return index[lex_winner(scored)];
}

void Engine::note_reward(double reward, RunReport& report) {
  if (reward > running_best_) {
    running_best_ = reward;
    report.best_reward_curve.emplace_back(frames_, reward);
  }
}

Engine::WinnerRecord Engine::evolve_group(int g, int iteration, RunReport& report,
                                          RunReport::IterationStat& stat) {
  auto& ps = groups_[g - 1];
  const uint64_t it = static_cast<uint64_t>(iteration);
  const uint64_t gu = static_cast<uint64_t>(g);

  int rounds = fixed_.outer;
  if (cfg_.randomize_per_iteration) {
    Rng meta(derive_stream({cfg_.master_seed, it, gu, stream::kOuterDraw}));
    rounds = meta.uniform_int(cfg_.outer_steps.lo, cfg_.outer_steps.hi);
  }

  for (int round = 1; round <= rounds; ++round) {
    const uint64_t ru = static_cast<uint64_t>(round);
    std::vector<RolloutRequest> requests;
    requests.reserve(ps.size());
    Rng inner_draw(derive_stream({cfg_.master_seed, it, gu, ru, stream::kInnerDraw}));
    for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
      RolloutRequest req;
      req.request_id = next_request_id_++;
      req.group_index = static_cast<uint32_t>(g);
      req.member_index = static_cast<uint32_t>(i);
      req.step_budget = static_cast<uint32_t>(
          cfg_.randomize_per_iteration
              ? inner_draw.uniform_int(cfg_.inner_steps.lo, cfg_.inner_steps.hi)
              : fixed_.inner);
      req.rng_stream_key = derive_stream(
          {cfg_.master_seed, it, gu, ru, static_cast<uint64_t>(i), stream::kRollout});
      req.policy = cfg_.policy;
      req.start = ps[i].snapshot;
      requests.push_back(std::move(req));
    }

    auto responses = backend_->run_batch(requests);
    if (responses.size() != requests.size())
      throw Error("engine: backend returned a mismatched batch");

    for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
      const RolloutOutcome& out = responses[i].outcome;
      frames_ += static_cast<uint64_t>(out.steps_taken);
      if (!backend_->applies_estimator_updates() && !out.observations_seen.empty())
        estimator_for_group(g).update(out.observations_seen);
      Particle& p = ps[i];
      apply_outcome(p, out);
      if (p.status == Status::Alive) {
        note_reward(p.cum_reward, report);
        if (out.steps_taken > 0) {
          NodeId child = tree_.add_child(p.node, p.snapshot, p.observation, p.cum_reward);
          move_particle(p, child);
        }
      }
    }

    bool any_alive = std::any_of(ps.begin(), ps.end(), [](const Particle& p) {
      return p.status == Status::Alive;
    });
    if (!any_alive) {
      // Whole population died: everyone climbs back up its own lineage.
      ++stat.rollbacks;
      for (int i = 0; i < static_cast<int>(ps.size()); ++i) {
        Rng rb(derive_stream(
            {cfg_.master_seed, it, gu, ru, static_cast<uint64_t>(i), stream::kRollback}));
        int lo = cfg_.randomize_per_iteration ? cfg_.rollback.lo : fixed_.rollback;
        int hi = cfg_.randomize_per_iteration ? cfg_.rollback.hi : fixed_.rollback;
        NodeId anc = tree_.get_ancestor(ps[i].node, lo, hi, rb);
        const TreeNode& n = tree_.node(anc);
        move_particle(ps[i], anc);
        ps[i].snapshot = n.snapshot;
        ps[i].observation = n.observation;
        ps[i].cum_reward = n.cum_reward;
        ps[i].status = Status::Alive;
      }
    } else {
      Rng tie(derive_stream({cfg_.master_seed, it, gu, ru, stream::kWinner}));
      int w = pick_winner(ps, g, /*alive_only=*/true, tie);
      WinnerRecord rec{ps[w].node, ps[w].snapshot, ps[w].observation,
                       ps[w].cum_reward, g};
      for (auto& p : ps)
        if (p.status == Status::Dead) reset_particle_to(p, rec);
    }
    if (probe_ && probe_->after_redistribution) probe_->after_redistribution(g, ps);
  }

  for (const auto& p : ps)
    if (p.status != Status::Alive)
      throw Error("engine: dead particle at consolidation");
  Rng ctie(derive_stream({cfg_.master_seed, it, gu, stream::kConsolidation}));
  int w = pick_winner(ps, g, /*alive_only=*/false, ctie);
  WinnerRecord rec{ps[w].node, ps[w].snapshot, ps[w].observation, ps[w].cum_reward, g};
  if (cfg_.consolidation_enabled)
    for (auto& p : ps) reset_particle_to(p, rec);
  stat.prunes += tree_.prune();
  if (probe_ && probe_->after_consolidation) probe_->after_consolidation(g, ps, w);
  return rec;
}

RunReport Engine::run() {
  RunReport report;
  report.best_reward_curve.emplace_back(0, 0.0);
  running_best_ = 0.0;

  int it = 0;
  for (it = 1; it <= cfg_.iterations; ++it) {
    if (cfg_.frames_budget > 0 && frames_ >= cfg_.frames_budget) {
      --it;
      break;
    }
    RunReport::IterationStat stat;
    stat.iteration = it;

    std::vector<WinnerRecord> winners;
    winners.reserve(cfg_.groups);
    for (int g = 1; g <= cfg_.groups; ++g) {
      // A group whose best reward lags the global winner restarts from it.
      double group_best = groups_[g - 1][0].cum_reward;
      for (const auto& p : groups_[g - 1]) group_best = std::max(group_best, p.cum_reward);
      if (group_best < global_.cum_reward) {
        for (auto& p : groups_[g - 1]) reset_particle_to(p, global_);
        ++stat.groups_reset;
      }
      winners.push_back(evolve_group(g, it, report, stat));
    }

    // Global sync: rank this iteration's group winners against the standing
    // winner, scoring novelty on the stored observations.
    std::vector<std::pair<double, double>> scored;
    Rng gtie(derive_stream({cfg_.master_seed, static_cast<uint64_t>(it), stream::kGlobal}));
    for (const auto& wrec : winners) {
      double tiebreak = cfg_.uncertainty_winner_enabled
                            ? estimator_for_group(wrec.origin_group).score(wrec.observation)
                            : gtie.uniform_real();
      scored.emplace_back(wrec.cum_reward, tiebreak);
    }
    {
      double tiebreak = cfg_.uncertainty_winner_enabled
                            ? estimator_for_group(global_.origin_group).score(global_.observation)
                            : gtie.uniform_real();
      scored.emplace_back(global_.cum_reward, tiebreak);
    }
    size_t chosen = lex_winner(scored);
    if (probe_ && probe_->after_global_sync) probe_->after_global_sync(scored, chosen);
    if (chosen < winners.size()) {
      tree_.set_occupancy(global_.node, -1);
      tree_.set_occupancy(winners[chosen].node, +1);
      global_ = winners[chosen];
    }

    stat.frames = frames_;
    stat.global_best_reward = global_.cum_reward;
    stat.tree_nodes = tree_.size();
    stat.winner_group = global_.origin_group;
    report.winner_history.push_back(stat);
  }

  report.iterations_run = std::min(it, cfg_.iterations);
  report.frames_consumed = frames_;
  report.final_tree_stats.nodes = tree_.size();
  report.final_tree_stats.total_added = tree_.total_added();
  report.final_tree_stats.total_pruned = tree_.total_pruned();
  report.final_tree_stats.max_depth = tree_.max_depth();
  return report;
}

}  // namespace gowu
