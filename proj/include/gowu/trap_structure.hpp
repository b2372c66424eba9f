#pragma once

#include <cstdint>
#include <utility>

#include "gowu/common.hpp"

namespace gowu::trap {

// Structural rules of the trap tree, shared by the environment and the
// search-cost reference implementations so both walk the same tree.
//
// Global depths: spine nodes v_i sit at depth i for i in [0, D+1]. The trap
// root hanging off v_i sits at depth i+1. A trap node is internal (six
// children, of which two are internal) only while its depth is <= D-1 and its
// parent still had internal capacity; every trap node at depth >= D is a
// leaf, and the children of an internal node at depth D-1 are all leaves.

// True when a trap node created at `depth` is internal rather than a leaf.
inline bool trap_node_internal(int depth, int D) { return depth <= D - 1; }

// True when the children of an internal trap node at `depth` include the two
// internal slots; at depth D-1 all six children collapse to leaves.
inline bool children_have_internal(int depth, int D) { return depth <= D - 2; }

// Which of the two actions at spine node v_i continues along the spine.
// Varies per level so no constant held action can ride the spine for free.
inline int spine_child_slot(int D, int i) {
  return static_cast<int>(derive_stream({0x53u, static_cast<uint64_t>(D),
                                         static_cast<uint64_t>(i)}) & 1u);
}

// The two child slots (of six) of an internal trap node that lead to internal
// children. Derived from the node's path hash so each node gets its own pair.
inline std::pair<int, int> internal_child_slots(uint64_t node_path_hash) {
  uint64_t h = derive_stream({0x54u, node_path_hash});
  int a = static_cast<int>(h % 6);
  int b = (a + 1 + static_cast<int>((h >> 8) % 5)) % 6;
  return {a, b};
}

// Exact node count of the full tree (spine + traps + goal), by direct count
// of each trap bush: the trap rooted next to v_i holds 12 * 2^(D-2-i) - 5
// nodes for i <= D-2, and the last trap root is a bare leaf.
inline uint64_t total_node_count(int D) {
  uint64_t total = static_cast<uint64_t>(D) + 2;  // v_0 .. v_{D+1}
  for (int i = 0; i <= D - 2; ++i)
    total += 12ull * (1ull << (D - 2 - i)) - 5ull;
  total += 1;  // trap root next to v_{D-1}, a leaf
  return total;
}

}  // namespace gowu::trap
