#pragma once

#include <cstdint>
#include <vector>

#include "xkgat/kg_store.hpp"
#include "xkgat/rule.hpp"

namespace xkgat {

/// One rule to plant. Relations are indexes into `rel<k>` names.
///  association: (X, head, c) <= (X, body, c')   with constants drawn from the value pool
///  path:        (X, head, Y) <= (X, body, Y)    with Y a per-subject value
/// Every subject receives the head triple; round(confidence * subjects) of
/// them also receive the body triple, so head coverage equals `confidence`.
struct PlantSpec {
  RuleKind kind = RuleKind::association;
  std::uint32_t head_relation = 0;
  std::uint32_t body_relation = 1;
  std::size_t subjects = 100;
  double confidence = 1.0;
};

struct SyntheticConfig {
  std::size_t n_entities = 2000;
  std::size_t n_relations = 20;
  /// Entities reserved as attribute values; the rest are items (subjects).
  std::size_t n_values = 200;
  std::vector<PlantSpec> rules;
  /// Random (item, relation, value) triples that never ground a planted rule.
  std::size_t noise_triples = 0;
  std::uint64_t seed = 0;
};

struct SyntheticKg {
  TripleStore store;
  std::vector<Rule> planted;  // normalized, in config order
  std::vector<RelationId> target_relations;
};

SyntheticKg generate_synthetic(const SyntheticConfig& config);

}  // namespace xkgat
