#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "xkgat/checkpoint.hpp"
#include "xkgat/explanation.hpp"
#include "xkgat/kg_store.hpp"
#include "xkgat/model.hpp"
#include "xkgat/neighbor_graph.hpp"

namespace xkgat {

/// Every chain ending at the target row, for lengths 1..layers. A chain
/// p_1 -> ... -> p_l has weight omega_l * C^l(n, p_l) * prod_{i<l} C^i(p_{i+1}, p_i).
/// Chains may pass through the target row itself, so for each length the
/// weights sum to omega_l (or less when a row on the way has no neighbors).
std::vector<Explanation> enumerate_explanations(const NeighborSubgraph& subgraph,
                                                const ForwardTrace<double>& trace);

/// Highest weight first; ties broken by shorter length, then by the triples.
std::vector<Explanation> top_k_explanations(std::vector<Explanation> candidates, std::size_t k);

/// Groundings of the explanation's rule in `store`, excluding its own.
std::size_t count_supports(const Explanation& explanation, const TripleStore& store);

struct ExplainedTriple {
  Triple target;
  std::vector<Explanation> top;
  std::vector<std::size_t> supports;
};

/// Top-k explanations of one triple. Chains through the target row are
/// dropped before ranking.
std::vector<Explanation> explain(const Triple& target, const TripleStore& store,
                                 const Checkpoint& checkpoint, std::size_t k);

/// TransE explanations: a single attention layer (omega = [1]) over the
/// depth-1 subgraph, evaluated on TransE embeddings.
std::vector<Explanation> transe_explanations(const Triple& target, const Parameters<double>& params,
                                             const TripleStore& store, std::size_t k,
                                             std::size_t neighbor_cap = 1000, std::uint64_t seed = 0);

struct ExplanationReport {
  std::size_t k = 0;
  std::size_t n_triples = 0;
  /// Triples with at least one top-k explanation of support >= 1.
  std::size_t n_explained = 0;
  double recall = 0.0;
  /// Mean over explained triples of the summed supports of their top k.
  std::optional<double> avg_support;
  std::vector<ExplainedTriple> details;
};

ExplanationReport explanation_report(std::span<const Triple> triples, const Checkpoint& checkpoint,
                                     const TripleStore& store, std::size_t k, unsigned workers = 1);

void write_explanations_jsonl(std::ostream& out, std::span<const ExplainedTriple> explained,
                              const Vocabulary& vocab);
void write_explanations_jsonl(const std::filesystem::path& path,
                              std::span<const ExplainedTriple> explained, const Vocabulary& vocab);
/// Reads the raw chains back; supports are taken from the file.
std::vector<ExplainedTriple> read_explanations_jsonl(const std::filesystem::path& path,
                                                     const Vocabulary& vocab);

}  // namespace xkgat
