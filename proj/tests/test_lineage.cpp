#include "doctest.h"
#include "gowu/lineage.hpp"
#include "helpers.hpp"
#include "properties.hpp"

using namespace gowu;
using namespace gowu::testing;

namespace {

Snapshot snap(uint8_t tag) { return Snapshot{EnvKind::Chain, {tag}}; }
Observation obs(uint8_t tag) { return Observation::from_bytes({tag}); }

}  // namespace

TEST_CASE("lineage tree starts with just the root") {
  LineageTree tree(snap(0), obs(0));
  CHECK(tree.size() == 1);
  CHECK(tree.total_added() == 1);
  CHECK(tree.total_pruned() == 0);
  CHECK(tree.contains(tree.root()));
  const TreeNode& root = tree.node(tree.root());
  CHECK(root.parent == kNoNode);
  CHECK(root.depth == 0);
  CHECK(root.cum_reward == 0.0);
  CHECK(root.occupants == 0);
  CHECK(root.children_count == 0);
  CHECK_THROWS_AS(tree.node(tree.root() + 1), UnknownNode);
}

TEST_CASE("add_child hands out monotone ids and tracks depth") {
  LineageTree tree(snap(0), obs(0));
  NodeId a = tree.add_child(tree.root(), snap(1), obs(1), 0.5);
  NodeId b = tree.add_child(a, snap(2), obs(2), 0.75);
  NodeId c = tree.add_child(tree.root(), snap(3), obs(3), 0.0);
  CHECK(a > tree.root());
  CHECK(b > a);
  CHECK(c > b);
  CHECK(tree.node(a).depth == 1);
  CHECK(tree.node(b).depth == 2);
  CHECK(tree.node(b).parent == a);
  CHECK(tree.node(tree.root()).children_count == 2);
  CHECK(tree.node(a).children_count == 1);
  CHECK(tree.node(b).cum_reward == 0.75);
  CHECK(tree.max_depth() == 2);
  CHECK(tree.size() == 4);
  CHECK_THROWS_AS(tree.add_child(999, snap(4), obs(4), 0.0), UnknownParent);
}

TEST_CASE("add_child enforces the node cap") {
  LineageTree tree(snap(0), obs(0), /*node_cap=*/3);
  tree.add_child(tree.root(), snap(1), obs(1), 0.0);
  tree.add_child(tree.root(), snap(2), obs(2), 0.0);
  CHECK_THROWS_AS(tree.add_child(tree.root(), snap(3), obs(3), 0.0), NodeCapExceeded);
}

TEST_CASE("occupancy cannot go negative or target unknown nodes") {
  LineageTree tree(snap(0), obs(0));
  tree.set_occupancy(tree.root(), +1);
  tree.set_occupancy(tree.root(), -1);
  CHECK_THROWS_AS(tree.set_occupancy(tree.root(), -1), NegativeOccupancy);
  CHECK_THROWS_AS(tree.set_occupancy(42, +1), UnknownNode);
  CHECK(tree.total_occupants() == 0);
}

TEST_CASE("prune cascades up abandoned lineages but spares the root") {
  LineageTree tree(snap(0), obs(0));
  NodeId a = tree.add_child(tree.root(), snap(1), obs(1), 0.0);
  NodeId b = tree.add_child(a, snap(2), obs(2), 0.0);
  NodeId c = tree.add_child(b, snap(3), obs(3), 0.0);
  tree.set_occupancy(c, +1);

  CHECK(tree.prune() == 0);  // the tip is occupied, so the chain stays

  tree.set_occupancy(c, -1);
  CHECK(tree.prune() == 3);  // c, then b, then a fall in one cascade
  CHECK(tree.size() == 1);
  CHECK(tree.contains(tree.root()));
  CHECK(tree.total_pruned() == 3);
  CHECK(tree.node(tree.root()).children_count == 0);
}

TEST_CASE("prune stops at occupied interior nodes") {
  LineageTree tree(snap(0), obs(0));
  NodeId a = tree.add_child(tree.root(), snap(1), obs(1), 0.0);
  NodeId b = tree.add_child(a, snap(2), obs(2), 0.0);
  tree.set_occupancy(a, +1);
  CHECK(tree.prune() == 1);  // only the abandoned tip b
  CHECK(tree.contains(a));
  CHECK_FALSE(tree.contains(b));
  CHECK(tree.node(a).children_count == 0);
}

TEST_CASE("get_ancestor walks up a bounded number of links") {
  LineageTree tree(snap(0), obs(0));
  std::vector<NodeId> chain{tree.root()};
  for (int d = 1; d <= 5; ++d)
    chain.push_back(tree.add_child(chain.back(), snap(static_cast<uint8_t>(d)),
                                   obs(static_cast<uint8_t>(d)), 0.0));
  Rng rng(7);
  CHECK(tree.get_ancestor(chain[5], 2, 2, rng) == chain[3]);
  CHECK(tree.get_ancestor(chain[5], 5, 5, rng) == chain[0]);
  CHECK(tree.get_ancestor(chain[2], 4, 4, rng) == tree.root());  // clamped
  CHECK(tree.get_ancestor(tree.root(), 1, 3, rng) == tree.root());
  for (int trial = 0; trial < 32; ++trial) {
    NodeId anc = tree.get_ancestor(chain[5], 1, 3, rng);
    int depth = tree.node(anc).depth;
    CHECK(depth >= 2);
    CHECK(depth <= 4);
  }
}

TEST_CASE("best_path prefers reward, then depth, then the older node") {
  SUBCASE("deeper node wins a reward tie") {
    LineageTree tree(snap(0), obs(0));
    NodeId a = tree.add_child(tree.root(), snap(1), obs(1), 1.0);
    NodeId b = tree.add_child(a, snap(2), obs(2), 1.0);
    tree.add_child(tree.root(), snap(3), obs(3), 1.0);
    std::vector<NodeId> expect{tree.root(), a, b};
    CHECK(tree.best_path() == expect);
  }
  SUBCASE("equal reward and depth go to the lower id") {
    LineageTree tree(snap(0), obs(0));
    NodeId a = tree.add_child(tree.root(), snap(1), obs(1), 1.0);
    tree.add_child(tree.root(), snap(2), obs(2), 1.0);
    std::vector<NodeId> expect{tree.root(), a};
    CHECK(tree.best_path() == expect);
  }
  SUBCASE("reward dominates depth") {
    LineageTree tree(snap(0), obs(0));
    NodeId a = tree.add_child(tree.root(), snap(1), obs(1), 0.5);
    tree.add_child(a, snap(2), obs(2), 0.5);
    NodeId c = tree.add_child(tree.root(), snap(3), obs(3), 2.0);
    std::vector<NodeId> expect{tree.root(), c};
    CHECK(tree.best_path() == expect);
  }
  SUBCASE("an empty tree yields just the root") {
    LineageTree tree(snap(0), obs(0));
    CHECK(tree.best_path() == std::vector<NodeId>{tree.root()});
  }
}

TEST_CASE("demonstrations serialize and parse byte-stably") {
  LineageTree tree(snap(0), obs(0));
  NodeId a = tree.add_child(tree.root(), snap(1), obs(1), 1.0);
  tree.add_child(a, snap(2), obs(2), 2.5);

  Demonstration demo = build_demonstration(tree, EnvKind::Chain, 0xabcd);
  REQUIRE(demo.entries.size() == 3);
  CHECK(demo.entries[0].depth_index == 0);
  CHECK(demo.entries[2].depth_index == 2);
  CHECK(demo.entries[2].cum_reward == 2.5);
  CHECK(demo.entries[1].snapshot.blob == snap(1).blob);

  auto bytes = demo.to_bytes();
  Demonstration back = Demonstration::from_bytes(bytes);
  CHECK(back.env_kind == demo.env_kind);
  CHECK(back.config_digest == demo.config_digest);
  CHECK(back.to_bytes() == bytes);

  SUBCASE("unsupported versions are rejected") {
    auto bad = bytes;
    bad[4] = 9;
    CHECK_THROWS_AS(Demonstration::from_bytes(bad), DecodeError);
  }
  SUBCASE("bad magic is rejected") {
    auto bad = bytes;
    bad[0] ^= 0xff;
    CHECK_THROWS_AS(Demonstration::from_bytes(bad), DecodeError);
  }
  SUBCASE("trailing bytes are rejected") {
    auto bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(Demonstration::from_bytes(bad), DecodeError);
  }
  SUBCASE("truncation is rejected") {
    auto bad = bytes;
    bad.resize(bad.size() - 3);
    CHECK_THROWS_AS(Demonstration::from_bytes(bad), DecodeError);
  }
}

TEST_CASE("prune soundness property holds on random trees") {
  PropertyResult r = prop_prune_soundness(300, 13);
  INFO(r.first_failure);
  CHECK(r.ok());
}
