#include "gowu/curriculum.hpp"

#include <algorithm>
#include <cmath>

namespace gowu {

void CurriculumConfig::validate() const {
  if (k_max < 1) throw ConfigError("curriculum: k_max must be >= 1");
  if (window < 1) throw ConfigError("curriculum: window must be >= 1");
  if (n_update < 1) throw ConfigError("curriculum: n_update must be >= 1");
  if (!(dec_lo > 0.0 && dec_lo <= dec_hi))
    throw ConfigError("curriculum: need 0 < dec_lo <= dec_hi");
  if (!(inc_lo > 0.0 && inc_lo <= inc_hi))
    throw ConfigError("curriculum: need 0 < inc_lo <= inc_hi");
  if (s_req > s_req_begin)
    throw ConfigError("curriculum: s_req must not exceed s_req_begin");
  if (s_req < 0.0 || s_req_begin > 1.0)
    throw ConfigError("curriculum: success thresholds must lie in [0, 1]");
  if (eps_tol < 0.0) throw ConfigError("curriculum: eps_tol must be >= 0");
  if (ema_alpha < 0.0 || ema_alpha >= 1.0)
    throw ConfigError("curriculum: ema_alpha must lie in [0, 1)");
  if (mu < 0.0) throw ConfigError("curriculum: mu must be >= 0");
  if (base_budget < 1) throw ConfigError("curriculum: base_budget must be >= 1");
  if (eval_episodes < 1) throw ConfigError("curriculum: eval_episodes must be >= 1");
}

double Segment::target_from(uint32_t t) const {
  if (t >= cum_reward.size())
    throw DomainError("segment: checkpoint index past the reward boundary");
  return cum_reward[t_end] - cum_reward[t];
}

std::vector<Segment> segment(const Demonstration& demo, int k_max, int demo_index) {
  if (k_max < 1) throw ConfigError("segment: k_max must be >= 1");
  if (demo.entries.empty()) throw NoRewardEvents("segment: empty demonstration");
  std::vector<uint32_t> events;
  for (size_t i = 1; i < demo.entries.size(); ++i)
    if (demo.entries[i].cum_reward > demo.entries[i - 1].cum_reward)
      events.push_back(static_cast<uint32_t>(i));
  if (events.empty())
    throw NoRewardEvents("segment: demonstration collects no reward");

  // Even downsample keeping the last event: pick every (n/k)-th quantile.
  size_t n = events.size();
  size_t k = std::min<size_t>(static_cast<size_t>(k_max), n);
  std::vector<Segment> out;
  out.reserve(k);
  for (size_t j = 0; j < k; ++j) {
    uint32_t boundary = events[(j + 1) * n / k - 1];
    Segment seg;
    seg.demo_index = demo_index;
    seg.index = static_cast<int>(j);
    seg.t_end = boundary;
    seg.cum_reward.reserve(boundary + 1);
    for (uint32_t t = 0; t <= boundary; ++t)
      seg.cum_reward.push_back(demo.entries[t].cum_reward);
    out.push_back(std::move(seg));
  }
  return out;
}

uint32_t sample_start(const CurriculumState& st, int window, Rng& rng) {
  uint32_t lo = st.t_curr > static_cast<uint32_t>(window)
                    ? st.t_curr - static_cast<uint32_t>(window)
                    : 0;
  return lo + static_cast<uint32_t>(rng.next_below(st.t_curr - lo + 1));
}

uint64_t episode_budget(const CurriculumState& st, double mu, int base_budget) {
  if (!st.l_bar_seeded) return static_cast<uint64_t>(base_budget);
  return static_cast<uint64_t>(std::ceil(mu * st.l_bar)) +
         static_cast<uint64_t>(base_budget);
}

namespace {

// Nearest integer with a floor of one step.
uint32_t integer_delta(double x) {
  long r = std::lround(x);
  return static_cast<uint32_t>(std::max(1L, r));
}

}  // namespace

std::optional<WindowMove> record(CurriculumState& st, const CurriculumConfig& cfg,
                                 uint32_t t_start, double r_agent,
                                 uint64_t rollout_len, const Segment& seg, Rng& rng) {
  if (t_start > st.t_curr)
    throw DomainError("record: start checkpoint past the current window");
  bool success = r_agent >= seg.target_from(t_start) - cfg.eps_tol;
  st.success_buffer.push_back(success ? 1 : 0);
  if (success) {
    double len = static_cast<double>(rollout_len);
    st.l_bar = st.l_bar_seeded
                   ? cfg.ema_alpha * st.l_bar + (1.0 - cfg.ema_alpha) * len
                   : len;
    st.l_bar_seeded = true;
  }
  if (st.success_buffer.size() < static_cast<size_t>(cfg.n_update)) return std::nullopt;

  double rate = 0.0;
  for (uint8_t b : st.success_buffer) rate += b;
  rate /= static_cast<double>(st.success_buffer.size());

  WindowMove move;
  move.t_before = st.t_curr;
  move.success_rate = rate;
  double w = static_cast<double>(cfg.window);
  if (st.t_curr == 0 && rate >= cfg.s_req_begin) {
    st.complete = true;
    move.completed = true;
  } else if (rate >= cfg.s_req) {
    uint32_t delta = integer_delta(rng.uniform_real(cfg.dec_lo * w, cfg.dec_hi * w));
    st.t_curr = st.t_curr > delta ? st.t_curr - delta : 0;
  } else {
    uint32_t delta = integer_delta(rng.uniform_real(cfg.inc_lo * w, cfg.inc_hi * w));
    st.t_curr = std::min(seg.t_end, st.t_curr + delta);
  }
  move.t_after = st.t_curr;
  st.success_buffer.clear();
  return move;
}

// ---------------------------------------------------------------------------

TabularQLearner::TabularQLearner(double learning_rate, double discount, double epsilon)
    : lr_(learning_rate), gamma_(discount), eps_(epsilon) {
  if (lr_ <= 0.0 || lr_ > 1.0) throw ConfigError("q-learner: learning rate in (0, 1]");
  if (gamma_ < 0.0 || gamma_ > 1.0) throw ConfigError("q-learner: discount in [0, 1]");
  if (eps_ < 0.0 || eps_ > 1.0) throw ConfigError("q-learner: epsilon in [0, 1]");
}

std::vector<double>& TabularQLearner::row(uint64_t key, int arity) {
  auto& q = q_[key];
  if (q.size() < static_cast<size_t>(arity)) q.resize(static_cast<size_t>(arity), 0.0);
  return q;
}

int TabularQLearner::argmax(const std::vector<double>& q, int arity) const {
  int best = 0;
  for (int a = 1; a < arity && a < static_cast<int>(q.size()); ++a)
    if (q[static_cast<size_t>(a)] > q[static_cast<size_t>(best)]) best = a;
  return best;
}

Action TabularQLearner::act(const Observation& obs, int arity, Rng& rng) {
  if (arity < 1) throw NoCandidates("q-learner: no actions available");
  if (rng.uniform_real() < eps_)
    return Action{static_cast<int>(rng.next_below(static_cast<uint64_t>(arity)))};
  return act_greedy(obs, arity);
}

Action TabularQLearner::act_greedy(const Observation& obs, int arity) {
  if (arity < 1) throw NoCandidates("q-learner: no actions available");
  auto it = q_.find(obs.hash);
  if (it == q_.end()) return Action{0};
  return Action{argmax(it->second, arity)};
}

void TabularQLearner::learn(const Trajectory& trajectory) {
  for (const auto& tr : trajectory) {
    double bootstrap = 0.0;
    if (!tr.terminal && tr.next_arity > 0) {
      auto it = q_.find(tr.next_obs.hash);
      if (it != q_.end())
        bootstrap = it->second[static_cast<size_t>(argmax(it->second, tr.next_arity))];
    }
    auto& q = row(tr.obs.hash, tr.action + 1);
    double& cell = q[static_cast<size_t>(tr.action)];
    cell += lr_ * (tr.reward + gamma_ * bootstrap - cell);
  }
}

std::vector<uint8_t> TabularQLearner::to_bytes() const {
  ByteWriter w;
  w.magic("GWQT");
  w.u8(1);
  w.f64(lr_);
  w.f64(gamma_);
  w.f64(eps_);
  w.u32(static_cast<uint32_t>(q_.size()));
  // Sort keys so equal tables serialize to equal bytes.
  std::vector<uint64_t> keys;
  keys.reserve(q_.size());
  for (const auto& [k, v] : q_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (uint64_t k : keys) {
    const auto& q = q_.at(k);
    w.u64(k);
    w.u32(static_cast<uint32_t>(q.size()));
    for (double v : q) w.f64(v);
  }
  return w.take();
}

TabularQLearner TabularQLearner::from_bytes(std::span<const uint8_t> data) {
  ByteReader r(data);
  r.expect_magic("GWQT", "q-table");
  uint8_t version = r.u8();
  if (version != 1)
    throw DecodeError("q-table: version mismatch, got " + std::to_string(version));
  double lr = r.f64();
  double gamma = r.f64();
  double eps = r.f64();
  TabularQLearner learner(lr, gamma, eps);
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    uint64_t key = r.u64();
    uint32_t m = r.u32();
    std::vector<double> q(m);
    for (uint32_t j = 0; j < m; ++j) q[j] = r.f64();
    learner.q_.emplace(key, std::move(q));
  }
  if (!r.at_end()) throw DecodeError("q-table: trailing bytes");
  return learner;
}

// ---------------------------------------------------------------------------

namespace {

struct EpisodeResult {
  double r_agent = 0.0;
  uint64_t steps = 0;
  Trajectory trajectory;
};

// Plays one episode from the environment's current state, stopping on death,
// on running out of actions, on hitting the step cap, or as soon as the
// target reward is met.
EpisodeResult play_episode(Env& env, Learner& learner, double target,
                           double eps_tol, uint64_t step_cap, Rng& rng,
                           bool greedy) {
  EpisodeResult out;
  if (out.r_agent >= target - eps_tol) return out;  // trivial target
  Observation obs = env.observe();
  while (out.steps < step_cap) {
    int arity = env.arity();
    if (arity == 0) break;
    Action a = greedy ? learner.act_greedy(obs, arity)
                      : learner.act(obs, arity, rng);
    StepResult res = env.step(a);
    ++out.steps;
    Transition tr;
    tr.obs = std::move(obs);
    tr.action = a.index;
    tr.reward = res.reward;
    tr.next_obs = res.observation;
    bool dead = res.status == Status::Dead;
    tr.next_arity = dead ? 0 : env.arity();
    tr.terminal = dead || tr.next_arity == 0;
    out.trajectory.push_back(std::move(tr));
    out.r_agent += res.reward;
    obs = std::move(res.observation);
    if (dead) break;
    if (out.r_agent >= target - eps_tol) break;
  }
  return out;
}

// Stream tags for the distillation driver's derived RNG streams.
constexpr uint64_t kStartDraw = 1;
constexpr uint64_t kEpisodeActions = 2;
constexpr uint64_t kWindowDraw = 3;
constexpr uint64_t kCleanReset = 4;
constexpr uint64_t kEval = 5;

}  // namespace

DistillReport run_distillation(const std::vector<Demonstration>& demos,
                               EnvFactory env_factory, Learner& learner,
                               const CurriculumConfig& cfg, uint64_t seed,
                               EnvSeedFactory clean_reset_factory) {
  cfg.validate();
  if (demos.empty()) throw ConfigError("distillation: no demonstrations");
  if (cfg.clean_reset_at_zero && !clean_reset_factory)
    throw ConfigError("distillation: clean_reset_at_zero needs a seeded factory");

  std::unique_ptr<Env> env = env_factory();
  for (const auto& demo : demos) {
    if (demo.env_kind != env->kind())
      throw KindMismatch("distillation: demonstration was recorded on " +
                         std::string(env_kind_name(demo.env_kind)));
    if (demo.config_digest != env->config_digest())
      throw KindMismatch(
          "distillation: demonstration comes from a differently configured "
          "instance");
  }

  std::vector<Segment> segments;
  for (size_t d = 0; d < demos.size(); ++d) {
    auto segs = segment(demos[d], cfg.k_max, static_cast<int>(d));
    for (auto& s : segs) segments.push_back(std::move(s));
  }

  std::vector<CurriculumState> states(segments.size());
  for (size_t i = 0; i < segments.size(); ++i) states[i].t_curr = segments[i].t_end;

  DistillReport report;
  report.segments_total = static_cast<int>(segments.size());

  uint64_t episode = 0;
  bool all_complete = false;
  while (!all_complete && episode < cfg.max_episodes) {
    all_complete = true;
    for (size_t i = 0; i < segments.size() && episode < cfg.max_episodes; ++i) {
      CurriculumState& st = states[i];
      if (st.complete) continue;
      all_complete = false;
      const Segment& seg = segments[i];
      const Demonstration& demo = demos[static_cast<size_t>(seg.demo_index)];

      Rng start_rng(derive_stream({seed, episode, kStartDraw}));
      uint32_t t_start = sample_start(st, cfg.window, start_rng);

      Env* episode_env = env.get();
      std::unique_ptr<Env> fresh;
      if (t_start == 0 && cfg.clean_reset_at_zero) {
        Rng reset_rng(derive_stream({seed, episode, kCleanReset}));
        fresh = clean_reset_factory(reset_rng.next());
        episode_env = fresh.get();
      } else {
        env->restore(demo.entries[t_start].snapshot);
      }

      double target = seg.target_from(t_start);
      Rng act_rng(derive_stream({seed, episode, kEpisodeActions}));
      EpisodeResult ep =
          play_episode(*episode_env, learner, target, cfg.eps_tol,
                       episode_budget(st, cfg.mu, cfg.base_budget), act_rng,
                       /*greedy=*/false);
      learner.learn(ep.trajectory);

      Rng window_rng(derive_stream({seed, episode, kWindowDraw}));
      auto move = record(st, cfg, t_start, ep.r_agent, ep.steps, seg, window_rng);
      ++episode;
      if (move) {
        move->demo_index = seg.demo_index;
        move->segment_index = seg.index;
        move->episode = episode;
        report.moves.push_back(*move);
      }
    }
  }
  report.episodes_used = episode;
  report.budget_exhausted = !all_complete;

  // Final evaluation: greedy episodes from checkpoint 0 against each
  // segment's full target.
  double total_rate = 0.0;
  for (size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    const Demonstration& demo = demos[static_cast<size_t>(seg.demo_index)];
    if (states[i].complete) ++report.segments_solved;
    int hits = 0;
    for (int e = 0; e < cfg.eval_episodes; ++e) {
      env->restore(demo.entries[0].snapshot);
      Rng eval_rng(derive_stream({seed, static_cast<uint64_t>(i),
                                  static_cast<uint64_t>(e), kEval}));
      EpisodeResult ep =
          play_episode(*env, learner, seg.target_from(0), cfg.eps_tol,
                       episode_budget(states[i], cfg.mu, cfg.base_budget),
                       eval_rng, /*greedy=*/true);
      if (ep.r_agent >= seg.target_from(0) - cfg.eps_tol) ++hits;
    }
    double rate = static_cast<double>(hits) / static_cast<double>(cfg.eval_episodes);
    report.per_segment_success.push_back(rate);
    total_rate += rate;
  }
  report.final_success_rate = total_rate / static_cast<double>(segments.size());
  return report;
}

Demonstration demo_from_actions(Env& env, std::span<const Action> actions) {
  Demonstration demo;
  demo.env_kind = env.kind();
  demo.config_digest = env.config_digest();
  double cum = 0.0;
  uint32_t idx = 0;
  demo.entries.push_back({env.snapshot(), cum, idx});
  for (const Action& a : actions) {
    StepResult res = env.step(a);
    cum += res.reward;
    ++idx;
    demo.entries.push_back({env.snapshot(), cum, idx});
    if (res.status == Status::Dead)
      throw DeadEnvironment("demonstration replay stepped into a dead state");
  }
  return demo;
}

}  // namespace gowu
