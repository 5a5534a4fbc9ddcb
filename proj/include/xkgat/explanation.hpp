#pragma once

#include <vector>

#include "xkgat/kg_store.hpp"

namespace xkgat {

/// (h1, r1, t1) ^ ... ^ (hl, rl, tl) -> target, with t_i = h_{i+1} and
/// t_l = head(target). `path` keeps the triples as they appear in the
/// neighbor subgraph, so inverse relations may occur.
struct Explanation {
  std::vector<Triple> path;
  std::vector<Index> rows;  // subgraph rows of the path triples
  Triple target;
  double alpha = 0.0;

  std::size_t length() const noexcept { return path.size(); }
  /// The chain starts at the target's tail entity.
  bool closed() const noexcept { return !path.empty() && path.front().head == target.tail; }
  /// Some path element is the target row itself.
  bool self_referential(Index target_row) const noexcept {
    for (auto r : rows) {
      if (r == target_row) return true;
    }
    return false;
  }
  /// t_i = h_{i+1} and t_l = head(target).
  bool chain_valid() const noexcept {
    if (path.empty()) return false;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (path[i].tail != path[i + 1].head) return false;
    }
    return path.back().tail == target.head;
  }
};

}  // namespace xkgat
