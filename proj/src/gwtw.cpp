#include "gowu/gwtw.hpp"

#include <algorithm>
#include <deque>

#include "gowu/env.hpp"
#include "gowu/trap_structure.hpp"

namespace gowu {

std::vector<double> recurrence_sequence(double x0, int steps) {
  std::vector<double> out{x0};
  for (int i = 0; i < steps; ++i) out.push_back(recurrence_next(out.back()));
  return out;
}

std::vector<Ratio> recurrence_sequence(Ratio x0, int steps) {
  std::vector<Ratio> out{x0};
  for (int i = 0; i < steps; ++i) out.push_back(recurrence_next(out.back()));
  return out;
}

// ---------------------------------------------------------------------------

SearchCostReport gwtw_reference_run(const GwtwConfig& cfg, uint64_t seed) {
  const int D = cfg.depth;
  const int B = cfg.particles;
  if (D < 2) throw InvalidDepth("gwtw reference: depth must be >= 2");
  if (B < 1) throw DomainError("gwtw reference: particles must be >= 1");

  Rng rng(derive_stream({0x47u, seed}));
  SearchCostReport report;

  // Levels are synchronized: after i advances every live particle sits at
  // depth i, either on the spine or inside some trap. Identity within a trap
  // does not affect the dynamics, so a particle is just its spine flag.
  int spine = B, trap = 0;
  report.per_level_spine_fraction.push_back(1.0);

  for (int level = 0; level <= D; ++level) {
    int next_spine = 0, next_trap = 0;
    for (int p = 0; p < spine; ++p) {
      ++report.node_evaluations;
      if (level == D) {
        ++next_spine;  // single child: the goal
        continue;
      }
      bool to_spine = (rng.next() & 1) != 0;
      if (to_spine) {
        ++next_spine;
      } else if (trap::trap_node_internal(level + 1, D)) {
        ++next_trap;
      }  // else the trap root is already a leaf: death
    }
    for (int p = 0; p < trap; ++p) {
      ++report.node_evaluations;
      if (trap::children_have_internal(level, D) && rng.next_below(6) < 2)
        ++next_trap;
    }
    if (level == D) {
      report.success = next_spine > 0;
      return report;
    }
    int survivors = next_spine + next_trap;
    if (survivors == 0) return report;  // extinction
    spine = 0;
    trap = 0;
    for (int p = 0; p < B; ++p) {
      if (rng.next_below(static_cast<uint64_t>(survivors)) <
          static_cast<uint64_t>(next_spine))
        ++spine;
      else
        ++trap;
    }
    if (level + 1 <= D - 1)
      report.per_level_spine_fraction.push_back(static_cast<double>(spine) / B);
  }
  return report;
}

namespace {

bool path_on_spine(int D, std::span<const uint8_t> path) {
  for (size_t i = 0; i < path.size(); ++i) {
    int expected = (static_cast<int>(i) < D) ? trap::spine_child_slot(D, static_cast<int>(i)) : 0;
    if (path[i] != expected) return false;
  }
  return true;
}

}  // namespace

SearchCostReport gwtw_reference_run_env(const GwtwConfig& cfg, uint64_t seed) {
  const int D = cfg.depth;
  const int B = cfg.particles;
  auto env = make_trap_tree(TrapTreeConfig{D});
  Rng rng(derive_stream({0x48u, seed}));
  SearchCostReport report;

  struct Walker {
    Snapshot snap;
    bool on_spine = true;
  };
  std::vector<Walker> pop(B, Walker{env->snapshot(), true});
  report.per_level_spine_fraction.push_back(1.0);

  for (int level = 0; level <= D; ++level) {
    std::vector<Walker> survivors;
    bool reached_goal = false;
    for (auto& w : pop) {
      ++report.node_evaluations;
      env->restore(w.snap);
      int ar = env->arity();
      StepResult r = env->step(Action{static_cast<int>(rng.next_below(ar))});
      if (r.status == Status::Dead) continue;
      if (r.reward > 0.0) reached_goal = true;
      Observation obs = r.observation;
      survivors.push_back(Walker{env->snapshot(), path_on_spine(D, obs.bytes)});
    }
    if (level == D) {
      report.success = reached_goal;
      return report;
    }
    if (survivors.empty()) return report;
    std::vector<Walker> next;
    next.reserve(B);
    int spine = 0;
    for (int p = 0; p < B; ++p) {
      next.push_back(survivors[rng.next_below(survivors.size())]);
      if (next.back().on_spine) ++spine;
    }
    pop = std::move(next);
    if (level + 1 <= D - 1)
      report.per_level_spine_fraction.push_back(static_cast<double>(spine) / B);
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

enum class Role : uint8_t { Spine, SpineLast, Goal, TrapInternal, TrapLeaf };

struct ImplicitNode {
  Role role;
  int depth;
};

// Children of a node, in canonical order (spine-ish child first for spine
// nodes, internal trap children first inside traps).
void children_of(const ImplicitNode& n, int D, std::vector<ImplicitNode>& out) {
  out.clear();
  int d = n.depth + 1;
  switch (n.role) {
    case Role::Spine:
      out.push_back({d <= D - 1 ? Role::Spine : Role::SpineLast, d});
      out.push_back({trap::trap_node_internal(d, D) ? Role::TrapInternal : Role::TrapLeaf, d});
      break;
    case Role::SpineLast:
      out.push_back({Role::Goal, d});
      break;
    case Role::TrapInternal: {
      bool internal = trap::children_have_internal(n.depth, D);
      for (int i = 0; i < 6; ++i)
        out.push_back({internal && i < 2 ? Role::TrapInternal : Role::TrapLeaf, d});
      break;
    }
    case Role::Goal:
    case Role::TrapLeaf:
      break;
  }
}

}  // namespace

uint64_t dfs_cost(int depth, uint64_t seed) {
  if (depth < 2) throw InvalidDepth("dfs: depth must be >= 2");
  Rng rng(derive_stream({0x44u, seed}));
  std::vector<ImplicitNode> stack{{Role::Spine, 0}};
  std::vector<ImplicitNode> kids;
  uint64_t visited = 0;
  while (!stack.empty()) {
    ImplicitNode n = stack.back();
    stack.pop_back();
    ++visited;
    if (n.role == Role::Goal) return visited;
    children_of(n, depth, kids);
    for (size_t i = kids.size(); i > 1; --i)
      std::swap(kids[i - 1], kids[rng.next_below(i)]);
    for (const auto& k : kids) stack.push_back(k);
  }
  throw DomainError("dfs: goal not found");  // unreachable on a well-formed tree
}

uint64_t bfs_cost(int depth) {
  if (depth < 2) throw InvalidDepth("bfs: depth must be >= 2");
  std::deque<ImplicitNode> queue{{Role::Spine, 0}};
  std::vector<ImplicitNode> kids;
  uint64_t visited = 0;
  while (!queue.empty()) {
    ImplicitNode n = queue.front();
    queue.pop_front();
    ++visited;
    if (n.role == Role::Goal) return visited;
    children_of(n, depth, kids);
    for (const auto& k : kids) queue.push_back(k);
  }
  throw DomainError("bfs: goal not found");  // unreachable on a well-formed tree
}

double random_walk_success(int depth, int walkers, int trials, uint64_t seed) {
  if (depth < 2) throw InvalidDepth("random walk: depth must be >= 2");
  if (walkers < 1 || trials < 1)
    throw DomainError("random walk: walkers and trials must be >= 1");
  Rng rng(derive_stream({0x52u, seed}));
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    bool any = false;
    for (int w = 0; w < walkers && !any; ++w) {
      bool on_spine = true;
      for (int i = 0; i < depth && on_spine; ++i)
        on_spine = (rng.next() & 1) != 0;
      any = on_spine;  // from v_D the single child is the goal
    }
    if (any) ++hits;
  }
  return static_cast<double>(hits) / trials;
}

}  // namespace gowu
