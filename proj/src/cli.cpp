#include "gowu/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gowu/curriculum.hpp"
#include "gowu/engine.hpp"
#include "gowu/env.hpp"
#include "gowu/gwtw.hpp"
#include "gowu/protocol.hpp"

namespace gowu {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config file parsing. Every object is checked against an allowlist so a
// misspelled key fails loudly instead of silently running defaults.

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) { known = true; break; }
    if (!known)
      throw ConfigError("config: unknown key \"" + where + it.key() + "\"");
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  return j;
}

struct EnvSpec {
  EnvKind kind = EnvKind::Chain;
  TrapTreeConfig trap;
  KeyCorridorConfig corridor;
  ChainConfig chain;
};

EnvSpec parse_env(const json& j) {
  if (!j.is_object()) throw ConfigError("config: \"env\" must be an object");
  if (!j.contains("kind")) throw ConfigError("config: env.kind is required");
  EnvSpec spec;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "trap_tree") {
    spec.kind = EnvKind::TrapTree;
    check_keys(j, {"kind", "depth"}, "env.");
    if (j.contains("depth")) spec.trap.depth = j.at("depth").get<int>();
  } else if (kind == "key_corridor") {
    spec.kind = EnvKind::KeyCorridor;
    check_keys(j,
               {"kind", "num_rooms", "room_length", "hazard_cells_per_room",
                "sticky_p", "layout_seed"},
               "env.");
    auto& c = spec.corridor;
    if (j.contains("num_rooms")) c.num_rooms = j.at("num_rooms").get<int>();
    if (j.contains("room_length")) c.room_length = j.at("room_length").get<int>();
    if (j.contains("hazard_cells_per_room"))
      c.hazard_cells_per_room = j.at("hazard_cells_per_room").get<int>();
    if (j.contains("sticky_p")) c.sticky_p = j.at("sticky_p").get<double>();
    if (j.contains("layout_seed")) c.layout_seed = j.at("layout_seed").get<uint64_t>();
  } else if (kind == "chain") {
    spec.kind = EnvKind::Chain;
    check_keys(j, {"kind", "length"}, "env.");
    if (j.contains("length")) spec.chain.length = j.at("length").get<int>();
  } else {
    throw ConfigError("config: unknown env.kind \"" + kind + "\"");
  }
  return spec;
}

std::unique_ptr<Env> build_env(const EnvSpec& spec) {
  switch (spec.kind) {
    case EnvKind::TrapTree: return make_trap_tree(spec.trap);
    case EnvKind::KeyCorridor: return make_key_corridor(spec.corridor);
    case EnvKind::Chain: return make_chain(spec.chain);
  }
  throw ConfigError("config: unknown environment kind");
}

EnvFactory make_env_factory(const EnvSpec& spec) {
  return [spec]() { return build_env(spec); };
}

// Population presets: the published per-game hyperparameter columns.
void apply_preset(EngineConfig& ec, const std::string& name) {
  if (name == "montezuma") {
    ec.groups = 4; ec.particles_per_group = 32;
    ec.outer_steps = {10, 20}; ec.inner_steps = {5, 15}; ec.rollback = {1, 3};
  } else if (name == "pitfall") {
    ec.groups = 4; ec.particles_per_group = 32;
    ec.outer_steps = {10, 20}; ec.inner_steps = {10, 20}; ec.rollback = {1, 4};
  } else if (name == "venture") {
    ec.groups = 4; ec.particles_per_group = 32;
    ec.outer_steps = {6, 16}; ec.inner_steps = {10, 20}; ec.rollback = {1, 12};
  } else if (name == "mujoco") {
    ec.groups = 16; ec.particles_per_group = 8;
    ec.outer_steps = {20, 40}; ec.inner_steps = {3, 4}; ec.rollback = {1, 20};
  } else {
    throw ConfigError("config: unknown preset \"" + name + "\"");
  }
}

IntRange parse_range(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2)
    throw ConfigError("config: " + where + " must be a [lo, hi] pair");
  return IntRange{j.at(0).get<int>(), j.at(1).get<int>()};
}

EngineConfig parse_engine(const json& root) {
  EngineConfig ec;
  if (root.contains("preset")) apply_preset(ec, root.at("preset").get<std::string>());
  if (!root.contains("engine")) return ec;
  const json& j = root.at("engine");
  if (!j.is_object()) throw ConfigError("config: \"engine\" must be an object");
  check_keys(j,
             {"groups", "particles_per_group", "outer_steps", "inner_steps",
              "rollback", "iterations", "frames_budget", "master_seed", "policy",
              "estimator", "consolidation_enabled", "uncertainty_winner_enabled",
              "randomize_per_iteration", "shared_estimator", "node_cap"},
             "engine.");
  if (j.contains("groups")) ec.groups = j.at("groups").get<int>();
  if (j.contains("particles_per_group"))
    ec.particles_per_group = j.at("particles_per_group").get<int>();
  if (j.contains("outer_steps"))
    ec.outer_steps = parse_range(j.at("outer_steps"), "engine.outer_steps");
  if (j.contains("inner_steps"))
    ec.inner_steps = parse_range(j.at("inner_steps"), "engine.inner_steps");
  if (j.contains("rollback"))
    ec.rollback = parse_range(j.at("rollback"), "engine.rollback");
  if (j.contains("iterations")) ec.iterations = j.at("iterations").get<int>();
  if (j.contains("frames_budget")) ec.frames_budget = j.at("frames_budget").get<uint64_t>();
  if (j.contains("master_seed")) ec.master_seed = j.at("master_seed").get<uint64_t>();
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    check_keys(p, {"kind", "epsilon"}, "engine.policy.");
    if (p.contains("kind")) {
      std::string k = p.at("kind").get<std::string>();
      if (k == "uniform") ec.policy.kind = PolicyKind::Uniform;
      else if (k == "block_fixed") ec.policy.kind = PolicyKind::BlockFixed;
      else throw ConfigError("config: unknown engine.policy.kind \"" + k + "\"");
    }
    if (p.contains("epsilon")) ec.policy.epsilon = p.at("epsilon").get<double>();
  }
  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    check_keys(e, {"kind", "projection_seed", "bits"}, "engine.estimator.");
    if (e.contains("kind")) {
      std::string k = e.at("kind").get<std::string>();
      if (k == "count") ec.estimator.kind = EstimatorKind::Count;
      else if (k == "simhash") ec.estimator.kind = EstimatorKind::SimHash;
      else throw ConfigError("config: unknown engine.estimator.kind \"" + k + "\"");
    }
    if (e.contains("projection_seed"))
      ec.estimator.projection_seed = e.at("projection_seed").get<uint64_t>();
    if (e.contains("bits")) ec.estimator.bits = e.at("bits").get<int>();
  }
  if (j.contains("consolidation_enabled"))
    ec.consolidation_enabled = j.at("consolidation_enabled").get<bool>();
  if (j.contains("uncertainty_winner_enabled"))
    ec.uncertainty_winner_enabled = j.at("uncertainty_winner_enabled").get<bool>();
  if (j.contains("randomize_per_iteration"))
    ec.randomize_per_iteration = j.at("randomize_per_iteration").get<bool>();
  if (j.contains("shared_estimator"))
    ec.shared_estimator = j.at("shared_estimator").get<bool>();
  if (j.contains("node_cap")) ec.node_cap = j.at("node_cap").get<size_t>();
  return ec;
}

CurriculumConfig parse_curriculum(const json& root) {
  CurriculumConfig cc;
  if (!root.contains("curriculum")) return cc;
  const json& j = root.at("curriculum");
  if (!j.is_object()) throw ConfigError("config: \"curriculum\" must be an object");
  check_keys(j,
             {"k_max", "window", "s_req", "s_req_begin", "n_update", "dec_lo",
              "dec_hi", "inc_lo", "inc_hi", "eps_tol", "ema_alpha", "mu",
              "base_budget", "max_episodes", "eval_episodes",
              "clean_reset_at_zero"},
             "curriculum.");
  if (j.contains("k_max")) cc.k_max = j.at("k_max").get<int>();
  if (j.contains("window")) cc.window = j.at("window").get<int>();
  if (j.contains("s_req")) cc.s_req = j.at("s_req").get<double>();
  if (j.contains("s_req_begin")) cc.s_req_begin = j.at("s_req_begin").get<double>();
  if (j.contains("n_update")) cc.n_update = j.at("n_update").get<int>();
  if (j.contains("dec_lo")) cc.dec_lo = j.at("dec_lo").get<double>();
  if (j.contains("dec_hi")) cc.dec_hi = j.at("dec_hi").get<double>();
  if (j.contains("inc_lo")) cc.inc_lo = j.at("inc_lo").get<double>();
  if (j.contains("inc_hi")) cc.inc_hi = j.at("inc_hi").get<double>();
  if (j.contains("eps_tol")) cc.eps_tol = j.at("eps_tol").get<double>();
  if (j.contains("ema_alpha")) cc.ema_alpha = j.at("ema_alpha").get<double>();
  if (j.contains("mu")) cc.mu = j.at("mu").get<double>();
  if (j.contains("base_budget")) cc.base_budget = j.at("base_budget").get<int>();
  if (j.contains("max_episodes")) cc.max_episodes = j.at("max_episodes").get<uint64_t>();
  if (j.contains("eval_episodes")) cc.eval_episodes = j.at("eval_episodes").get<int>();
  if (j.contains("clean_reset_at_zero"))
    cc.clean_reset_at_zero = j.at("clean_reset_at_zero").get<bool>();
  return cc;
}

TabularQLearner parse_learner(const json& root) {
  double lr = 0.1, gamma = 0.99, eps = 0.1;
  if (root.contains("learner")) {
    const json& j = root.at("learner");
    check_keys(j, {"learning_rate", "discount", "epsilon"}, "learner.");
    if (j.contains("learning_rate")) lr = j.at("learning_rate").get<double>();
    if (j.contains("discount")) gamma = j.at("discount").get<double>();
    if (j.contains("epsilon")) eps = j.at("epsilon").get<double>();
  }
  return TabularQLearner(lr, gamma, eps);
}

constexpr std::initializer_list<const char*> kTopLevelKeys = {
    "preset", "env", "engine", "curriculum", "learner",
    "seeds",  "demos", "demo_from_oracle"};

// ---------------------------------------------------------------------------
// Output helpers

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("GOWU_OUT_DIR"); env && *env) return env;
  return ".";
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

const char* env_kind_string(EnvKind k) { return env_kind_name(k); }

json metrics_schema_record() {
  return json{{"kind", "schema"}, {"version", 1}};
}

// ---------------------------------------------------------------------------
// explore

struct ExploreArgs {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  uint64_t frames_budget = 0;
  bool frames_budget_set = false;
  int workers = 0;
  bool deterministic = false;
};

int cmd_explore(const ExploreArgs& a, std::ostream& out) {
  json root = load_config_file(a.config_path);
  check_keys(root, kTopLevelKeys, "");
  if (!root.contains("env")) throw ConfigError("config: explore needs an \"env\" section");
  EnvSpec env_spec = parse_env(root.at("env"));
  EngineConfig base = parse_engine(root);
  if (a.frames_budget_set) base.frames_budget = a.frames_budget;

  std::vector<uint64_t> seeds;
  if (a.seed_set) {
    seeds.push_back(a.seed);
  } else if (root.contains("seeds")) {
    for (const auto& s : root.at("seeds")) seeds.push_back(s.get<uint64_t>());
    if (seeds.empty()) throw ConfigError("config: \"seeds\" must not be empty");
  } else {
    seeds.push_back(base.master_seed);
  }

  std::filesystem::path dir = resolve_out_dir(a.out_dir);
  std::filesystem::create_directories(dir);

  for (uint64_t seed : seeds) {
    EngineConfig ec = base;
    ec.master_seed = seed;
    EnvFactory factory = make_env_factory(env_spec);

    std::unique_ptr<RolloutBackend> backend;
    if (!a.deterministic && a.workers > 0)
      backend = std::make_unique<ProtocolBackend>(factory, a.workers);

    Engine engine(ec, factory, backend.get());
    RunReport report = engine.run();

    std::ostringstream metrics;
    metrics << metrics_schema_record().dump() << "\n";
    json cfg_echo{{"kind", "config"},
                  {"seed", seed},
                  {"env", env_kind_string(env_spec.kind)},
                  {"groups", ec.groups},
                  {"particles_per_group", ec.particles_per_group},
                  {"iterations", ec.iterations},
                  {"frames_budget", ec.frames_budget}};
    metrics << cfg_echo.dump() << "\n";
    for (const auto& [frames, reward] : report.best_reward_curve) {
      json rec{{"kind", "improvement"}, {"frames", frames}, {"reward", reward}};
      metrics << rec.dump() << "\n";
    }
    for (const auto& it : report.winner_history) {
      json rec{{"kind", "iteration"},
               {"iteration", it.iteration},
               {"frames", it.frames},
               {"global_best_reward", it.global_best_reward},
               {"tree_nodes", it.tree_nodes},
               {"groups_reset", it.groups_reset},
               {"rollbacks", it.rollbacks},
               {"prunes", it.prunes},
               {"winner_group", it.winner_group}};
      metrics << rec.dump() << "\n";
    }
    double best = report.best_reward_curve.back().second;
    json final_rec{{"kind", "final"},
                   {"frames_consumed", report.frames_consumed},
                   {"iterations_run", report.iterations_run},
                   {"best_reward", best},
                   {"tree_nodes", report.final_tree_stats.nodes},
                   {"total_added", report.final_tree_stats.total_added},
                   {"total_pruned", report.final_tree_stats.total_pruned},
                   {"max_depth", report.final_tree_stats.max_depth}};
    metrics << final_rec.dump() << "\n";

    std::string text = metrics.str();
    write_file(dir / ("metrics-" + std::to_string(seed) + ".jsonl"),
               std::span<const uint8_t>(
                   reinterpret_cast<const uint8_t*>(text.data()), text.size()));

    Demonstration demo = engine.best_demonstration();
    write_file(dir / ("demo-" + std::to_string(seed) + ".bin"), demo.to_bytes());

    json summary{{"kind", "explore_summary"},
                 {"seed", seed},
                 {"best_reward", best},
                 {"frames_consumed", report.frames_consumed},
                 {"iterations_run", report.iterations_run},
                 {"tree_nodes", report.final_tree_stats.nodes},
                 {"demo_checkpoints", demo.entries.size()}};
    out << summary.dump() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench

int cmd_bench(const std::string& algo, int depth, int traversers, int trials,
              int walkers, uint64_t seed, std::ostream& out) {
  bool all = algo == "all";
  if (all || algo == "bfs") {
    uint64_t cost = bfs_cost(depth);
    json rec{{"kind", "bench"}, {"algo", "bfs"}, {"depth", depth},
             {"node_evaluations", cost}, {"success", true}};
    out << rec.dump() << "\n";
  }
  if (all || algo == "dfs") {
    uint64_t total = 0, lo = 0, hi = 0;
    for (int t = 0; t < trials; ++t) {
      uint64_t c = dfs_cost(depth, derive_stream({seed, static_cast<uint64_t>(t)}));
      total += c;
      lo = t == 0 ? c : std::min(lo, c);
      hi = std::max(hi, c);
    }
    json rec{{"kind", "bench"}, {"algo", "dfs"}, {"depth", depth},
             {"trials", trials},
             {"mean_node_evaluations", static_cast<double>(total) / trials},
             {"min_node_evaluations", lo}, {"max_node_evaluations", hi}};
    out << rec.dump() << "\n";
  }
  if (all || algo == "gwtw") {
    GwtwConfig cfg{depth, traversers};
    SearchCostReport rep = gwtw_reference_run(cfg, seed);
    json rec{{"kind", "bench"}, {"algo", "gwtw"}, {"depth", depth},
             {"traversers", traversers},
             {"node_evaluations", rep.node_evaluations},
             {"success", rep.success}};
    out << rec.dump() << "\n";
  }
  if (all || algo == "rw") {
    double rate = random_walk_success(depth, walkers, trials, seed);
    json rec{{"kind", "bench"}, {"algo", "rw"}, {"depth", depth},
             {"walkers", walkers}, {"trials", trials}, {"success_rate", rate},
             {"per_walk_expected", std::pow(2.0, -depth)}};
    out << rec.dump() << "\n";
  }
  if (!all && algo != "bfs" && algo != "dfs" && algo != "gwtw" && algo != "rw")
    throw ConfigError("bench: unknown algo \"" + algo + "\"");
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

Ratio parse_ratio(const std::string& text) {
  auto slash = text.find('/');
  auto to_ll = [&](const std::string& part) {
    long long v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || p != part.data() + part.size())
      throw ConfigError("analyze: \"" + text + "\" is not an integer or p/q fraction");
    return v;
  };
  if (slash == std::string::npos) return Ratio(to_ll(text));
  return Ratio(to_ll(text.substr(0, slash)), to_ll(text.substr(slash + 1)));
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

int cmd_analyze(const std::string& x0_text, int n, std::ostream& out) {
  if (n < 0) throw ConfigError("analyze: --n must be >= 0");
  Ratio x0 = parse_ratio(x0_text);
  if (!(x0 > Ratio(0)))
    throw ConfigError("analyze: --x0 must be positive");
  // Exact fractions stay within 64-bit range for a few dozen iterates; the
  // decimal column continues past that.
  constexpr int kExactCap = 25;
  std::vector<Ratio> exact = recurrence_sequence(x0, std::min(n, kExactCap));
  std::vector<double> dec = recurrence_sequence(x0.value(), n);
  for (int i = 0; i <= n; ++i) {
    out << "x[" << i << "] = " << format_double(dec[static_cast<size_t>(i)]);
    if (i < static_cast<int>(exact.size()))
      out << " (" << exact[static_cast<size_t>(i)].num << "/"
          << exact[static_cast<size_t>(i)].den << ")";
    out << "\n";
  }
  Ratio quarter(1, 4);
  bool fixed = recurrence_next(quarter) == quarter;
  out << "fixed point f(1/4) = 1/4 exactly: " << (fixed ? "yes" : "NO") << "\n";
  std::vector<double> tail = recurrence_sequence(x0.value(), 50);
  double gap = std::fabs(tail[50] - 0.25);
  out << "|x[50] - 1/4| = " << format_double(gap) << " ("
      << (gap < 1e-6 ? "< 1e-6" : ">= 1e-6") << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// distill

std::vector<Demonstration> gather_demos(const json& root, const EnvSpec& env_spec) {
  std::vector<Demonstration> demos;
  if (root.contains("demos")) {
    for (const auto& p : root.at("demos")) {
      auto bytes = read_file(p.get<std::string>());
      demos.push_back(Demonstration::from_bytes(bytes));
    }
  }
  bool from_oracle = root.value("demo_from_oracle", demos.empty());
  if (from_oracle) {
    std::unique_ptr<Env> env = build_env(env_spec);
    std::vector<Action> plan = solve_oracle(*env);
    std::unique_ptr<Env> replay = build_env(env_spec);
    demos.push_back(demo_from_actions(*replay, plan));
  }
  if (demos.empty()) throw ConfigError("distill: no demonstrations configured");
  return demos;
}

int cmd_distill(const std::string& config_path, const std::string& out_dir,
                uint64_t seed, bool seed_set, std::ostream& out) {
  json root = load_config_file(config_path);
  check_keys(root, kTopLevelKeys, "");
  if (!root.contains("env")) throw ConfigError("config: distill needs an \"env\" section");
  EnvSpec env_spec = parse_env(root.at("env"));
  CurriculumConfig cc = parse_curriculum(root);
  TabularQLearner learner = parse_learner(root);
  std::vector<Demonstration> demos = gather_demos(root, env_spec);
  uint64_t run_seed = seed_set ? seed : 1;

  EnvSeedFactory clean_factory;
  if (cc.clean_reset_at_zero) {
    if (env_spec.kind != EnvKind::KeyCorridor)
      throw ConfigError("distill: clean_reset_at_zero needs a key_corridor env");
    KeyCorridorConfig base = env_spec.corridor;
    clean_factory = [base](uint64_t layout_seed) {
      KeyCorridorConfig c = base;
      c.layout_seed = layout_seed;
      return make_key_corridor(c);
    };
  }

  DistillReport report = run_distillation(demos, make_env_factory(env_spec),
                                          learner, cc, run_seed, clean_factory);

  std::filesystem::path dir = resolve_out_dir(out_dir);
  std::filesystem::create_directories(dir);
  std::ostringstream progress;
  progress << metrics_schema_record().dump() << "\n";
  for (const auto& m : report.moves) {
    json rec{{"kind", "window_move"},
             {"demo", m.demo_index},
             {"segment", m.segment_index},
             {"episode", m.episode},
             {"t_before", m.t_before},
             {"t_after", m.t_after},
             {"success_rate", m.success_rate},
             {"completed", m.completed}};
    progress << rec.dump() << "\n";
  }
  json summary{{"kind", "distill_summary"},
               {"segments_total", report.segments_total},
               {"segments_solved", report.segments_solved},
               {"episodes_used", report.episodes_used},
               {"budget_exhausted", report.budget_exhausted},
               {"final_success_rate", report.final_success_rate},
               {"per_segment_success", report.per_segment_success}};
  progress << summary.dump() << "\n";

  std::string text = progress.str();
  write_file(dir / ("distill-" + std::to_string(run_seed) + ".jsonl"),
             std::span<const uint8_t>(
                 reinterpret_cast<const uint8_t*>(text.data()), text.size()));
  write_file(dir / ("qtable-" + std::to_string(run_seed) + ".bin"),
             learner.to_bytes());
  out << summary.dump() << "\n";
  return report.budget_exhausted ? 1 : 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::string& config_path, const std::string& policy,
             int episodes, uint64_t max_steps, double epsilon,
             double success_threshold, bool threshold_set, uint64_t seed,
             std::ostream& out) {
  json root = load_config_file(config_path);
  check_keys(root, kTopLevelKeys, "");
  if (!root.contains("env")) throw ConfigError("config: eval needs an \"env\" section");
  EnvSpec env_spec = parse_env(root.at("env"));
  if (episodes < 1) throw ConfigError("eval: --episodes must be >= 1");

  std::unique_ptr<Env> probe = build_env(env_spec);
  std::vector<Action> oracle_plan = solve_oracle(*probe);
  double oracle_return = 0.0;
  {
    std::unique_ptr<Env> replay = build_env(env_spec);
    for (const Action& a : oracle_plan) oracle_return += replay->step(a).reward;
  }
  double threshold = threshold_set ? success_threshold : oracle_return;

  std::optional<TabularQLearner> learner;
  if (policy != "oracle") learner = TabularQLearner::from_bytes(read_file(policy));

  double sum = 0.0, sum_sq = 0.0;
  int hits = 0;
  for (int e = 0; e < episodes; ++e) {
    std::unique_ptr<Env> env = build_env(env_spec);
    Rng rng(derive_stream({seed, static_cast<uint64_t>(e)}));
    double ret = 0.0;
    if (learner) {
      for (uint64_t t = 0; t < max_steps; ++t) {
        int arity = env->arity();
        if (arity == 0 || env->status() == Status::Dead) break;
        Observation obs = env->observe();
        Action a = (epsilon > 0.0 && rng.uniform_real() < epsilon)
                       ? Action{static_cast<int>(rng.next_below(
                             static_cast<uint64_t>(arity)))}
                       : learner->act_greedy(obs, arity);
        StepResult res = env->step(a);
        ret += res.reward;
        if (res.status == Status::Dead) break;
      }
    } else {
      // Oracle policy: open-loop replay of the planned action sequence.
      for (const Action& a : oracle_plan) {
        if (env->arity() == 0 || env->status() == Status::Dead) break;
        StepResult res = env->step(a);
        ret += res.reward;
        if (res.status == Status::Dead) break;
      }
    }
    sum += ret;
    sum_sq += ret * ret;
    if (ret >= threshold) ++hits;
  }
  double mean = sum / episodes;
  double var = sum_sq / episodes - mean * mean;
  json rec{{"kind", "eval"},
           {"policy", policy},
           {"episodes", episodes},
           {"mean_return", mean},
           {"std_return", std::sqrt(std::max(0.0, var))},
           {"success_threshold", threshold},
           {"success_rate", static_cast<double>(hits) / episodes}};
  out << rec.dump() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"particle-tree exploration toolkit"};
  app.require_subcommand(1);

  ExploreArgs ex;
  auto* explore = app.add_subcommand("explore", "run the exploration engine");
  explore->add_option("--config", ex.config_path, "JSON run configuration")->required();
  explore->add_option("--out", ex.out_dir, "output directory (default $GOWU_OUT_DIR or .)");
  auto* ex_seed = explore->add_option("--seed", ex.seed, "override the master seed");
  auto* ex_frames = explore->add_option("--frames-budget", ex.frames_budget,
                                        "override the frame budget");
  explore->add_option("--workers", ex.workers,
                      "serve rollouts through N protocol workers (0 = in-process)");
  explore->add_flag("--deterministic", ex.deterministic,
                    "force the in-process backend for byte-stable outputs");

  std::string bench_algo = "all";
  int bench_depth = 8, bench_traversers = 256, bench_trials = 100, bench_walkers = 256;
  uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "search-cost comparison on trap trees");
  bench->add_option("--algo", bench_algo, "gwtw | bfs | dfs | rw | all");
  bench->add_option("--depth", bench_depth, "trap tree depth D");
  bench->add_option("--traversers", bench_traversers, "population size B");
  bench->add_option("--trials", bench_trials, "dfs seeds / random-walk trials");
  bench->add_option("--walkers", bench_walkers, "random walkers per trial");
  bench->add_option("--seed", bench_seed, "RNG seed");

  std::string analyze_x0 = "1";
  int analyze_n = 10;
  auto* analyze = app.add_subcommand("analyze", "survivor-fraction recurrence report");
  analyze->add_option("--x0", analyze_x0, "starting fraction, integer or p/q");
  analyze->add_option("--n", analyze_n, "number of recurrence applications");

  std::string di_config, di_out;
  uint64_t di_seed = 1;
  auto* distill = app.add_subcommand("distill", "backward-curriculum policy training");
  distill->add_option("--config", di_config, "JSON run configuration")->required();
  distill->add_option("--out", di_out, "output directory (default $GOWU_OUT_DIR or .)");
  auto* di_seed_opt = distill->add_option("--seed", di_seed, "training seed");

  std::string ev_config, ev_policy = "oracle";
  int ev_episodes = 500;
  uint64_t ev_max_steps = 10'000, ev_seed = 1;
  double ev_epsilon = 0.0, ev_threshold = 0.0;
  auto* eval = app.add_subcommand("eval", "run a saved or oracle policy");
  eval->add_option("--config", ev_config, "JSON run configuration")->required();
  eval->add_option("--policy", ev_policy, "q-table file path, or \"oracle\"");
  eval->add_option("--episodes", ev_episodes, "number of evaluation episodes");
  eval->add_option("--max-steps", ev_max_steps, "per-episode step cap");
  eval->add_option("--epsilon", ev_epsilon, "exploration rate during evaluation");
  auto* ev_thresh = eval->add_option("--success-threshold", ev_threshold,
                                     "return counted as success (default: oracle return)");
  eval->add_option("--seed", ev_seed, "RNG seed");

  std::vector<const char*> argv;
  argv.push_back("gowu");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (explore->parsed()) {
      ex.seed_set = ex_seed->count() > 0;
      ex.frames_budget_set = ex_frames->count() > 0;
      return cmd_explore(ex, out);
    }
    if (bench->parsed())
      return cmd_bench(bench_algo, bench_depth, bench_traversers, bench_trials,
                       bench_walkers, bench_seed, out);
    if (analyze->parsed()) return cmd_analyze(analyze_x0, analyze_n, out);
    if (distill->parsed())
      return cmd_distill(di_config, di_out, di_seed, di_seed_opt->count() > 0, out);
    if (eval->parsed())
      return cmd_eval(ev_config, ev_policy, ev_episodes, ev_max_steps, ev_epsilon,
                      ev_threshold, ev_thresh->count() > 0, ev_seed, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "error: no subcommand\n";
  return 2;
}

}  // namespace gowu
