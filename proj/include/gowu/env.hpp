#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "gowu/common.hpp"

namespace gowu {

// Resettable sequential decision process. Deterministic given its config,
// snapshot state and action sequence; any internal stochasticity (sticky
// actions) draws from an RNG whose state lives inside the snapshot.
class Env {
 public:
  virtual ~Env() = default;

  virtual EnvKind kind() const = 0;

  // Number of legal actions at the current state. 0 marks a terminal state
  // that is still Alive (goal reached, nothing left to do).
  virtual int arity() const = 0;

  virtual Status status() const = 0;

  virtual Observation observe() const = 0;

  // Rejects actions with index outside [0, arity). Dead is absorbing:
  // stepping a Dead environment is rejected outright.
  virtual StepResult step(Action a) = 0;

  virtual Snapshot snapshot() const = 0;

  // Restores exactly the state captured by `s`, including Alive/Dead status
  // and any internal RNG state. Throws KindMismatch when the snapshot comes
  // from a different environment kind or an incompatibly configured instance,
  // CorruptSnapshot when the blob does not decode.
  virtual void restore(const Snapshot& s) = 0;

  // Digest over the layout-defining part of the config. Snapshots embed it so
  // a checkpoint cannot be restored into a differently shaped instance.
  virtual uint64_t config_digest() const = 0;

  // Fresh instance with the same layout but stochastic elements disabled,
  // restored to this instance's current state. Search oracles plan on this.
  virtual std::unique_ptr<Env> fork_deterministic() const = 0;
};

// ---------------------------------------------------------------------------
// Binary trap tree. A spine v_0 .. v_{D+1} where each spine node below the
// end has one spine child and one trap child. Traps are six-way bushes (two
// internal children, four leaves) whose internal nodes stop at depth D-1, so
// every trap node at depth >= D is a leaf. Entering any leaf other than the
// deepest spine node kills the walker; reaching v_{D+1} pays +1 and ends the
// episode in an Alive terminal state.

struct TrapTreeConfig {
  int depth = 8;  // D >= 2
};

std::unique_ptr<Env> make_trap_tree(const TrapTreeConfig& cfg);

// ---------------------------------------------------------------------------
// Key corridor. `num_rooms` rooms of 3 x room_length cells laid left to
// right, separated by walls with one door each. Every room holds one key;
// door r opens only after key r is collected. Hazard cells kill on entry.
// Entering the treasure cell behind the last door pays +10 and ends the
// episode Alive. Keys and first door transits pay +1 each. With sticky_p > 0
// each step repeats the previously executed action with that probability;
// the RNG driving this is part of the snapshot.

struct KeyCorridorConfig {
  int num_rooms = 2;
  int room_length = 4;        // columns per room, >= 2
  int hazard_cells_per_room = 0;
  double sticky_p = 0.0;
  uint64_t layout_seed = 1;
};

std::unique_ptr<Env> make_key_corridor(const KeyCorridorConfig& cfg);

// ---------------------------------------------------------------------------
// Chain: cells 0..n, start at 0, action 1 moves right, action 0 moves left
// (clamped at 0). Reaching cell n pays +1 and terminates Alive.

struct ChainConfig {
  int length = 10;  // n >= 1
};

std::unique_ptr<Env> make_chain(const ChainConfig& cfg);

// ---------------------------------------------------------------------------
// Exhaustive breadth-first planner over snapshots. Returns the shortest
// action sequence from the environment's current state to the terminal event
// with the highest cumulative reward, exploring deterministic dynamics
// (sticky_p treated as 0). Throws UnsolvableLayout when no rewarding terminal
// is reachable, NodeCapExceeded when the deduplicated frontier outgrows
// node_cap.
std::vector<Action> solve_oracle(const Env& env, size_t node_cap = 4'000'000);

}  // namespace gowu
