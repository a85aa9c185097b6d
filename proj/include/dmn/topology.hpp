#pragma once

#include <bit>
#include <stdexcept>
#include <utility>

namespace dmn {

// Perfect binary tree of lamination nodes. Internal nodes are stored
// level-major with the deepest level first and the root last; within a level
// nodes run left to right. Level k in [1, depth] holds 2^(k-1) nodes, and the
// deepest level's children are the 2^depth inputs (leaves). Leaves alternate
// phases: even leaf indices carry the first phase, odd ones the second.
class TreeTopology {
 public:
  explicit TreeTopology(int depth) : depth_(depth) {
    if (depth < 1 || depth > 20) throw std::invalid_argument("tree depth out of range");
  }

  int depth() const { return depth_; }
  int leaves() const { return 1 << depth_; }
  int nodes() const { return (1 << depth_) - 1; }

  // First node of a level's storage block.
  int level_offset(int level) const { return leaves() - (1 << level); }

  int node_at(int level, int i) const { return level_offset(level) + i; }

  int level_of(int node) const {
    return std::bit_width(static_cast<unsigned>(leaves() - node - 1));
  }

  int index_in_level(int node) const { return node - level_offset(level_of(node)); }

  int root() const { return nodes() - 1; }

  bool children_are_leaves(int node) const { return level_of(node) == depth_; }

  // Internal child (side 0 = first, 1 = second); only below the deepest level.
  int child(int node, int side) const {
    const int k = level_of(node);
    return node_at(k + 1, 2 * index_in_level(node) + side);
  }

  // Leaf child of a deepest-level node.
  int leaf_child(int node, int side) const { return 2 * index_in_level(node) + side; }

  int parent(int node) const {
    const int k = level_of(node);
    if (k == 1) return -1;
    return node_at(k - 1, index_in_level(node) / 2);
  }

  int leaf_parent(int leaf) const { return node_at(depth_, leaf / 2); }

  // Half-open leaf index range covered by a node's subtree.
  std::pair<int, int> leaf_range(int node) const {
    const int k = level_of(node);
    const int width = 1 << (depth_ - k + 1);
    const int begin = index_in_level(node) * width;
    return {begin, begin + width};
  }

  // 0 for the first phase, 1 for the second.
  static int leaf_phase(int leaf) { return leaf & 1; }

 private:
  int depth_;
};

}  // namespace dmn
