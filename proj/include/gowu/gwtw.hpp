#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "gowu/common.hpp"

namespace gowu {

// Exact rational on int64, for checking the survivor recurrence without
// floating-point noise. Only the handful of iterates needed by the analysis
// are computed exactly, so int64 headroom is plenty.
struct Ratio {
  long long num = 0;
  long long den = 1;

  Ratio() = default;
  Ratio(long long n) : num(n), den(1) {}
  Ratio(long long n, long long d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den == 0) throw DomainError("ratio: zero denominator");
    if (den < 0) { num = -num; den = -den; }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }

  friend Ratio operator+(Ratio a, Ratio b) { return Ratio(a.num * b.den + b.num * a.den, a.den * b.den); }
  friend Ratio operator-(Ratio a, Ratio b) { return Ratio(a.num * b.den - b.num * a.den, a.den * b.den); }
  friend Ratio operator*(Ratio a, Ratio b) { return Ratio(a.num * b.num, a.den * b.den); }
  friend Ratio operator/(Ratio a, Ratio b) {
    if (b.num == 0) throw DomainError("ratio: division by zero");
    return Ratio(a.num * b.den, a.den * b.num);
  }
  friend bool operator==(Ratio a, Ratio b) { return a.num == b.num && a.den == b.den; }
  friend bool operator>(Ratio a, Ratio b) { return a.num * b.den > b.num * a.den; }
  friend bool operator<(Ratio a, Ratio b) { return b > a; }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Fraction of a synchronized particle level that survives one step when a
// fraction x sits on the spine: x + (1 - x) / 3.
template <class T>
T survivor_fraction(T x) {
  if (!(x > T(0))) throw DomainError("survivor_fraction: x must be positive");
  return (T(1) + T(2) * x) / T(3);
}

// Next-level spine fraction after moving and resampling:
// f(x) = 3x / (2 (1 + 2x)). Fixed point at 1/4; strictly increasing on (0,1].
template <class T>
T recurrence_next(T x) {
  if (!(x > T(0))) throw DomainError("recurrence_next: x must be positive");
  return (T(3) * x) / (T(2) * (T(1) + T(2) * x));
}

// [x0, f(x0), f(f(x0)), ...] with `steps` applications of the map.
std::vector<double> recurrence_sequence(double x0, int steps);
std::vector<Ratio> recurrence_sequence(Ratio x0, int steps);

// ---------------------------------------------------------------------------
// Search-cost instrumentation over the trap tree. All algorithms charge one
// node evaluation per particle-level advance (population search) or per node
// expansion (DFS/BFS), so their costs compare on a single scale.

struct SearchCostReport {
  uint64_t node_evaluations = 0;
  bool success = false;
  // Spine fraction of the resampled population at levels 0..D-1, the range
  // where trap structure is uniform and the recurrence applies.
  std::vector<double> per_level_spine_fraction;
};

struct GwtwConfig {
  int depth = 8;      // D
  int particles = 64; // B
};

// One trial of the resampling particle search, simulated directly on node
// roles (no environment machinery): every particle moves to a uniform random
// child, leaf-landers die, survivors are resampled with replacement back to
// B. Success once any particle reaches the node below the spine end.
SearchCostReport gwtw_reference_run(const GwtwConfig& cfg, uint64_t seed);

// Same dynamics driven through the trap tree environment via snapshots.
// Slower; kept as the cross-check for the role-based implementation.
SearchCostReport gwtw_reference_run_env(const GwtwConfig& cfg, uint64_t seed);

// Depth-first search with uniformly shuffled child order; counts nodes
// visited until the goal is popped.
uint64_t dfs_cost(int depth, uint64_t seed);

// Breadth-first search in canonical child order; counts nodes visited until
// the goal is popped (the goal is the unique deepest node, so this equals the
// full node count).
uint64_t bfs_cost(int depth);

// Fraction of `trials` in which at least one of `walkers` independent uniform
// root-to-leaf walks ends at the goal.
double random_walk_success(int depth, int walkers, int trials, uint64_t seed);

}  // namespace gowu
