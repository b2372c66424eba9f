#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gowu/common.hpp"

namespace gowu {

using NodeId = uint64_t;
constexpr NodeId kNoNode = 0;

struct TreeNode {
  NodeId parent = kNoNode;
  int depth = 0;
  double cum_reward = 0.0;
  Snapshot snapshot;
  Observation observation;
  uint32_t children_count = 0;
  uint32_t occupants = 0;
};

// Ancestry tree over environment checkpoints. Node ids are handed out
// monotonically and never reused, so a parent id is always smaller than any
// of its children and the structure is acyclic by construction. The root is
// never removed.
class LineageTree {
 public:
  explicit LineageTree(Snapshot root_snapshot, Observation root_observation,
                       size_t node_cap = 10'000'000);

  NodeId root() const { return kRoot; }
  size_t size() const { return nodes_.size(); }
  uint64_t total_added() const { return total_added_; }
  uint64_t total_pruned() const { return total_pruned_; }

  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  const TreeNode& node(NodeId id) const;

  // Appends a checkpoint under `parent`. Throws UnknownParent when the parent
  // is not in the tree, NodeCapExceeded past the cap.
  NodeId add_child(NodeId parent, Snapshot snapshot, Observation observation,
                   double cum_reward);

  // Adjusts a node's occupant counter by +1/-1 as particles arrive or leave.
  // Throws UnknownNode, or NegativeOccupancy when a decrement would push the
  // counter below zero.
  void set_occupancy(NodeId id, int delta);

  // Removes, transitively, every node with no occupants and no children.
  // Returns the number of nodes removed.
  size_t prune();

  // Walks up k parent links, k drawn uniformly from [k_min, k_max], stopping
  // early at the root.
  NodeId get_ancestor(NodeId id, int k_min, int k_max, Rng& rng) const;

  // Root-to-best-node id sequence, where best means highest cum_reward, ties
  // broken by greater depth, then by lower id.
  std::vector<NodeId> best_path() const;

  int max_depth() const;

  // Sum of occupant counters over all nodes; conserved by the engine.
  uint64_t total_occupants() const;

 private:
  static constexpr NodeId kRoot = 1;
  std::unordered_map<NodeId, TreeNode> nodes_;
  NodeId next_id_ = kRoot + 1;
  size_t node_cap_;
  uint64_t total_added_ = 0;
  uint64_t total_pruned_ = 0;
};

// ---------------------------------------------------------------------------
// Replayable checkpoint trail extracted from a lineage (or recorded densely
// from an action replay). Entries sit one rollout (or one step) apart;
// depth_index is the entry's position along the trail.

struct DemonstrationEntry {
  Snapshot snapshot;
  double cum_reward = 0.0;
  uint32_t depth_index = 0;
};

struct Demonstration {
  EnvKind env_kind = EnvKind::Chain;
  uint64_t config_digest = 0;
  std::vector<DemonstrationEntry> entries;

  std::vector<uint8_t> to_bytes() const;
  static Demonstration from_bytes(std::span<const uint8_t> data);
};

// The best_path of `tree` packaged as a demonstration.
Demonstration build_demonstration(const LineageTree& tree, EnvKind kind,
                                  uint64_t config_digest);

}  // namespace gowu
