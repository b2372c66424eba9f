#include <algorithm>
#include <deque>
#include <unordered_map>

#include "gowu/env.hpp"

namespace gowu {

// Breadth-first enumeration over deduplicated observations. States are
// expanded in discovery order, so path lengths are non-decreasing and the
// first hit on the best terminal is also the shortest route to it.
// Deduplication on observation bytes is sound because the built-in
// environments fold every reward-relevant flag into the observation.
std::vector<Action> solve_oracle(const Env& env, size_t node_cap) {
  auto work = env.fork_deterministic();

  struct State {
    Snapshot snap;
    Observation obs;
    double cum = 0.0;
    int parent = -1;
    int action = -1;
    int depth = 0;
    bool terminal_alive = false;
  };

  std::vector<State> states;
  std::unordered_map<uint64_t, std::vector<int>> by_hash;

  auto find_or_insert = [&](State&& s) -> int {
    auto& bucket = by_hash[s.obs.hash];
    for (int idx : bucket)
      if (states[idx].obs == s.obs) return -1;
    if (states.size() >= node_cap)
      throw NodeCapExceeded("solve oracle: more than " + std::to_string(node_cap) +
                            " distinct states");
    bucket.push_back(static_cast<int>(states.size()));
    states.push_back(std::move(s));
    return static_cast<int>(states.size()) - 1;
  };

  {
    State root;
    root.snap = work->snapshot();
    root.obs = work->observe();
    root.terminal_alive = work->arity() == 0 && work->status() == Status::Alive;
    find_or_insert(std::move(root));
  }

  std::deque<int> frontier{0};
  while (!frontier.empty()) {
    int cur = frontier.front();
    frontier.pop_front();
    if (states[cur].terminal_alive) continue;
    work->restore(states[cur].snap);
    if (work->status() == Status::Dead) continue;
    int ar = work->arity();
    for (int a = 0; a < ar; ++a) {
      work->restore(states[cur].snap);
      StepResult step = work->step(Action{a});
      if (step.status == Status::Dead) continue;
      State next;
      next.snap = work->snapshot();
      next.obs = step.observation;
      next.cum = states[cur].cum + step.reward;
      next.parent = cur;
      next.action = a;
      next.depth = states[cur].depth + 1;
      next.terminal_alive = work->arity() == 0;
      int idx = find_or_insert(std::move(next));
      if (idx >= 0) frontier.push_back(idx);
    }
  }

  int best = -1;
  for (int i = 0; i < static_cast<int>(states.size()); ++i) {
    const State& s = states[i];
    if (!s.terminal_alive) continue;
    if (best < 0 || s.cum > states[best].cum ||
        (s.cum == states[best].cum && s.depth < states[best].depth))
      best = i;
  }
  if (best < 0)
    throw UnsolvableLayout("solve oracle: no live terminal state reachable");

  std::vector<Action> actions;
  for (int i = best; states[i].parent >= 0; i = states[i].parent)
    actions.push_back(Action{states[i].action});
  std::reverse(actions.begin(), actions.end());
  return actions;
}

}  // namespace gowu
