#include "xkgat/neighbor_graph.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace xkgat {

NeighborSubgraph make_subgraph(std::vector<Triple> triples, std::vector<int> depth) {
  if (triples.empty()) throw DataError("subgraph needs at least the target triple");
  if (depth.size() != triples.size()) throw DataError("depth labels do not match triples");
  const auto n = static_cast<Index>(triples.size());
  std::unordered_map<EntityId, std::vector<Index>> rows_by_tail;
  for (Index j = 0; j < n; ++j) rows_by_tail[triples[j].tail].push_back(j);

  std::vector<Eigen::Triplet<double>> entries;
  for (Index i = 0; i < n; ++i) {
    auto it = rows_by_tail.find(triples[i].head);
    if (it == rows_by_tail.end()) continue;
    for (Index j : it->second) {
      if (j != i) entries.emplace_back(i, j, 1.0);
    }
  }
  NeighborSubgraph out;
  out.triples = std::move(triples);
  out.depth = std::move(depth);
  out.adjacency.resize(n, n);
  out.adjacency.setFromTriplets(entries.begin(), entries.end());
  out.adjacency.makeCompressed();
  return out;
}

std::vector<Triple> one_degree_neighbors(const TripleStore& store, const Triple& target) {
  const auto inverse = inverse_of(target, store.vocab());
  std::vector<Triple> out;
  if (target.head >= store.vocab().num_entities()) return out;
  for (auto pos : store.by_tail(target.head)) {
    const auto& t = store.triples()[pos];
    if (t == target || (inverse && t == *inverse)) continue;
    out.push_back(t);
  }
  return out;
}

namespace {

// Algorithm R over candidate positions; returns the kept positions ascending.
std::vector<std::size_t> reservoir_sample(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> kept(cap);
  for (std::size_t i = 0; i < cap; ++i) kept[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = cap; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    const auto j = pick(rng);
    if (j < cap) kept[j] = i;
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

NeighborSubgraph build_subgraph(const TripleStore& store, const Triple& target,
                                const SubgraphOptions& options) {
  if (options.max_depth < 1) throw DataError("max_depth must be >= 1");
  if (options.neighbor_cap < 1) throw DataError("neighbor_cap must be >= 1");
  const auto& vocab = store.vocab();
  if (target.head >= vocab.num_entities() || target.tail >= vocab.num_entities() ||
      target.relation >= vocab.num_relations()) {
    throw DataError("target triple references an unknown id");
  }
  if (options.mode == SubgraphMode::training && !store.contains(target)) {
    throw DataError("training target is not in the store");
  }
  const auto inverse = inverse_of(target, vocab);
  const auto leaks = [&](const Triple& t) { return t == target || (inverse && t == *inverse); };

  std::vector<std::vector<Triple>> levels(static_cast<std::size_t>(options.max_depth) + 1);
  levels[0].push_back(target);
  TripleSet seen;
  std::unordered_set<EntityId> expanded;
  std::vector<Triple> candidates;
  for (int d = 1; d <= options.max_depth; ++d) {
    for (const auto& frontier : levels[d - 1]) {
      const EntityId shared = frontier.head;
      if (!expanded.insert(shared).second) continue;
      candidates.clear();
      for (auto pos : store.by_tail(shared)) {
        const auto& t = store.triples()[pos];
        if (!leaks(t)) candidates.push_back(t);
      }
      if (candidates.size() > options.neighbor_cap) {
        auto kept = reservoir_sample(candidates.size(), options.neighbor_cap,
                                     mix_seed(options.seed, shared));
        std::vector<Triple> sampled;
        sampled.reserve(kept.size());
        for (auto k : kept) sampled.push_back(candidates[k]);
        candidates.swap(sampled);
      }
      for (const auto& c : candidates) {
        if (seen.insert(c).second) levels[d].push_back(c);
      }
    }
  }

  std::vector<Triple> triples;
  std::vector<int> depth;
  for (int d = options.max_depth; d >= 1; --d) {
    for (const auto& t : levels[d]) {
      triples.push_back(t);
      depth.push_back(d);
    }
  }
  triples.push_back(target);
  depth.push_back(0);
  return make_subgraph(std::move(triples), std::move(depth));
}

Eigen::VectorXi adjacency_row_degrees(const NeighborSubgraph& subgraph) {
  Eigen::VectorXi degrees(subgraph.size());
  for (Index i = 0; i < subgraph.adjacency.outerSize(); ++i) {
    degrees(i) = static_cast<int>(subgraph.adjacency.outerIndexPtr()[i + 1] -
                                  subgraph.adjacency.outerIndexPtr()[i]);
  }
  return degrees;
}

}  // namespace xkgat
