#pragma once

#include <cstdint>
#include <vector>

#include "xkgat/kg_store.hpp"
#include "xkgat/types.hpp"

namespace xkgat {

enum class SubgraphMode {
  training,   // the target must be a stored triple
  inference,  // any triple over known entities
};

struct SubgraphOptions {
  int max_depth = 2;
  std::size_t neighbor_cap = 1000;
  std::uint64_t seed = 0;
  SubgraphMode mode = SubgraphMode::inference;
};

/// Ordered triple list N with the target last, per-row degree labels and the
/// adjacency A, where A(i, j) = 1 iff tail(N_j) == head(N_i) and i != j.
struct NeighborSubgraph {
  std::vector<Triple> triples;
  std::vector<int> depth;
  SparseMatrix<double> adjacency;

  Index size() const noexcept { return static_cast<Index>(triples.size()); }
  Index target_row() const noexcept { return size() - 1; }
  const Triple& target() const { return triples.back(); }
  Matrix<double> dense_adjacency() const { return Matrix<double>(adjacency); }
};

/// Builds the adjacency for an explicit ordered triple list (target last).
NeighborSubgraph make_subgraph(std::vector<Triple> triples, std::vector<int> depth);

/// Triples whose tail is the target's head, minus the target and its inverse.
std::vector<Triple> one_degree_neighbors(const TripleStore& store, const Triple& target);

/// Breadth-first expansion of one-degree neighbors up to `max_depth`. Each
/// expansion keeps at most `neighbor_cap` candidates, sampled by a reservoir
/// seeded from (seed, head entity). Rows are ordered deepest first, discovery
/// order within a depth, target last; each triple appears once at its minimum
/// depth.
NeighborSubgraph build_subgraph(const TripleStore& store, const Triple& target,
                                const SubgraphOptions& options);

Eigen::VectorXi adjacency_row_degrees(const NeighborSubgraph& subgraph);

}  // namespace xkgat
