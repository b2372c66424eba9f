#include "gowu/lineage.hpp"

#include <algorithm>

namespace gowu {

LineageTree::LineageTree(Snapshot root_snapshot, Observation root_observation,
                         size_t node_cap)
    : node_cap_(node_cap) {
  TreeNode root;
  root.parent = kNoNode;
  root.depth = 0;
  root.cum_reward = 0.0;
  root.snapshot = std::move(root_snapshot);
  root.observation = std::move(root_observation);
  nodes_.emplace(kRoot, std::move(root));
  total_added_ = 1;
}

const TreeNode& LineageTree::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end())
    throw UnknownNode("lineage: node " + std::to_string(id) + " not in tree");
  return it->second;
}

NodeId LineageTree::add_child(NodeId parent, Snapshot snapshot,
                              Observation observation, double cum_reward) {
  auto it = nodes_.find(parent);
  if (it == nodes_.end())
    throw UnknownParent("lineage: parent " + std::to_string(parent) + " not in tree");
  if (nodes_.size() >= node_cap_)
    throw NodeCapExceeded("lineage: node cap " + std::to_string(node_cap_) + " reached");
  TreeNode child;
  child.parent = parent;
  child.depth = it->second.depth + 1;
  child.cum_reward = cum_reward;
  child.snapshot = std::move(snapshot);
  child.observation = std::move(observation);
  NodeId id = next_id_++;
  it->second.children_count += 1;
  nodes_.emplace(id, std::move(child));
  total_added_ += 1;
  return id;
}

void LineageTree::set_occupancy(NodeId id, int delta) {
  auto it = nodes_.find(id);
  if (it == nodes_.end())
    throw UnknownNode("lineage: node " + std::to_string(id) + " not in tree");
  if (delta < 0 && it->second.occupants < static_cast<uint32_t>(-delta))
    throw NegativeOccupancy("lineage: occupancy of node " + std::to_string(id) +
                            " would drop below zero");
  it->second.occupants += delta;
}

size_t LineageTree::prune() {
  std::vector<NodeId> dead;
  for (const auto& [id, n] : nodes_)
    if (id != kRoot && n.occupants == 0 && n.children_count == 0)
      dead.push_back(id);
  size_t removed = 0;
  while (!dead.empty()) {
    NodeId id = dead.back();
    dead.pop_back();
    auto it = nodes_.find(id);
    NodeId parent = it->second.parent;
    nodes_.erase(it);
    ++removed;
    auto pit = nodes_.find(parent);
    pit->second.children_count -= 1;
    if (parent != kRoot && pit->second.occupants == 0 && pit->second.children_count == 0)
      dead.push_back(parent);
  }
  total_pruned_ += removed;
  return removed;
}

NodeId LineageTree::get_ancestor(NodeId id, int k_min, int k_max, Rng& rng) const {
  const TreeNode* n = &node(id);
  int k = rng.uniform_int(k_min, k_max);
  NodeId cur = id;
  for (int i = 0; i < k && n->parent != kNoNode; ++i) {
    cur = n->parent;
    n = &node(cur);
  }
  return cur;
}

std::vector<NodeId> LineageTree::best_path() const {
  NodeId best = kRoot;
  const TreeNode* bn = &nodes_.at(kRoot);
  for (const auto& [id, n] : nodes_) {
    bool better = n.cum_reward > bn->cum_reward ||
                  (n.cum_reward == bn->cum_reward &&
                   (n.depth > bn->depth || (n.depth == bn->depth && id < best)));
    if (better) {
      best = id;
      bn = &n;
    }
  }
  std::vector<NodeId> path;
  for (NodeId cur = best; cur != kNoNode; cur = nodes_.at(cur).parent)
    path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

int LineageTree::max_depth() const {
  int best = 0;
  for (const auto& [id, n] : nodes_) best = std::max(best, n.depth);
  return best;
}

uint64_t LineageTree::total_occupants() const {
  uint64_t total = 0;
  for (const auto& [id, n] : nodes_) total += n.occupants;
  return total;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kDemoMagic[4] = {'G', 'W', 'D', 'M'};
constexpr uint8_t kDemoVersion = 1;
}  // namespace

std::vector<uint8_t> Demonstration::to_bytes() const {
  ByteWriter w;
  w.magic(kDemoMagic);
  w.u8(kDemoVersion);
  w.u8(static_cast<uint8_t>(env_kind));
  w.u64(config_digest);
  w.u32(static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.u32(e.depth_index);
    w.f64(e.cum_reward);
    w.u8(static_cast<uint8_t>(e.snapshot.env_kind));
    w.sized_bytes(e.snapshot.blob);
  }
  return w.take();
}

Demonstration Demonstration::from_bytes(std::span<const uint8_t> data) {
  ByteReader r(data);
  r.expect_magic(kDemoMagic, "demonstration");
  if (r.u8() != kDemoVersion) throw DecodeError("demonstration: unsupported version");
  Demonstration d;
  d.env_kind = static_cast<EnvKind>(r.u8());
  d.config_digest = r.u64();
  uint32_t count = r.u32();
  d.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    DemonstrationEntry e;
    e.depth_index = r.u32();
    e.cum_reward = r.f64();
    e.snapshot.env_kind = static_cast<EnvKind>(r.u8());
    e.snapshot.blob = r.sized_bytes();
    d.entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw DecodeError("demonstration: trailing bytes");
  return d;
}

Demonstration build_demonstration(const LineageTree& tree, EnvKind kind,
                                  uint64_t config_digest) {
  Demonstration d;
  d.env_kind = kind;
  d.config_digest = config_digest;
  uint32_t idx = 0;
  for (NodeId id : tree.best_path()) {
    const TreeNode& n = tree.node(id);
    d.entries.push_back(DemonstrationEntry{n.snapshot, n.cum_reward, idx++});
  }
  return d;
}

}  // namespace gowu
