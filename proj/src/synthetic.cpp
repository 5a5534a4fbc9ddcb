#include "xkgat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace xkgat {

namespace {

void check_config(const SyntheticConfig& config) {
  if (config.n_entities == 0 || config.n_relations == 0) throw DataError("counts must be positive");
  if (config.n_values == 0 || config.n_values >= config.n_entities) {
    throw DataError("n_values must be in [1, n_entities)");
  }
  std::set<std::uint32_t> path_relations;
  std::vector<int> uses(config.n_relations, 0);
  std::size_t associations = 0;
  std::size_t subjects = 0;
  for (const auto& spec : config.rules) {
    if (spec.head_relation >= config.n_relations || spec.body_relation >= config.n_relations) {
      throw DataError("planted rule references an undeclared relation");
    }
    if (spec.head_relation == spec.body_relation) {
      throw DataError("planted rule uses the same relation in head and body");
    }
    if (!(spec.confidence > 0.0 && spec.confidence <= 1.0)) {
      throw DataError("planted rule confidence must be in (0, 1]");
    }
    if (spec.subjects == 0) throw DataError("planted rule needs at least one subject");
    ++uses[spec.head_relation];
    ++uses[spec.body_relation];
    if (spec.kind == RuleKind::path) {
      path_relations.insert(spec.head_relation);
      path_relations.insert(spec.body_relation);
    } else {
      ++associations;
    }
    subjects += spec.subjects;
  }
  for (auto r : path_relations) {
    if (uses[r] > 1) {
      throw DataError("relation rel" + std::to_string(r) +
                      " of a path rule is reused by another planted rule");
    }
  }
  if (2 * associations > config.n_values) throw DataError("not enough value entities for constants");
  if (subjects > config.n_entities - config.n_values) {
    throw DataError("not enough item entities for the requested subjects");
  }
}

}  // namespace

SyntheticKg generate_synthetic(const SyntheticConfig& config) {
  check_config(config);
  std::mt19937_64 rng(mix_seed(config.seed, 0x5e7));

  auto vocab = std::make_shared<Vocabulary>();
  const std::size_t n_items = config.n_entities - config.n_values;
  for (std::size_t i = 0; i < n_items; ++i) vocab->intern_entity("item" + std::to_string(i));
  for (std::size_t j = 0; j < config.n_values; ++j) vocab->intern_entity("value" + std::to_string(j));
  for (std::size_t k = 0; k < config.n_relations; ++k) vocab->intern_relation("rel" + std::to_string(k));
  const auto value_id = [&](std::size_t j) { return static_cast<EntityId>(n_items + j); };

  std::vector<EntityId> items(n_items);
  std::iota(items.begin(), items.end(), EntityId{0});
  std::shuffle(items.begin(), items.end(), rng);
  std::vector<std::size_t> values(config.n_values);
  std::iota(values.begin(), values.end(), std::size_t{0});
  std::shuffle(values.begin(), values.end(), rng);

  SyntheticKg out;
  TripleSet triples;
  std::set<std::pair<RelationId, EntityId>> body_patterns;
  std::set<RelationId> blocked_relations;
  std::uniform_int_distribution<std::size_t> pick_value(0, config.n_values - 1);
  std::size_t next_item = 0;
  std::size_t next_value = 0;

  for (const auto& spec : config.rules) {
    const auto head_rel = static_cast<RelationId>(spec.head_relation);
    const auto body_rel = static_cast<RelationId>(spec.body_relation);
    const auto with_body =
        static_cast<std::size_t>(std::llround(spec.confidence * static_cast<double>(spec.subjects)));
    blocked_relations.insert(head_rel);
    Rule rule;
    if (spec.kind == RuleKind::association) {
      const EntityId head_const = value_id(values[next_value++]);
      const EntityId body_const = value_id(values[next_value++]);
      body_patterns.emplace(body_rel, body_const);
      for (std::size_t s = 0; s < spec.subjects; ++s) {
        const EntityId x = items[next_item + s];
        triples.insert({x, head_rel, head_const});
        if (s < with_body) triples.insert({x, body_rel, body_const});
      }
      rule.head = {Term::variable(1), head_rel, Term::constant(head_const)};
      rule.body = {{Term::variable(1), body_rel, Term::constant(body_const)}};
    } else {
      blocked_relations.insert(body_rel);
      for (std::size_t s = 0; s < spec.subjects; ++s) {
        const EntityId x = items[next_item + s];
        const EntityId y = value_id(pick_value(rng));
        triples.insert({x, head_rel, y});
        if (s < with_body) triples.insert({x, body_rel, y});
      }
      rule.head = {Term::variable(1), head_rel, Term::variable(2)};
      rule.body = {{Term::variable(1), body_rel, Term::variable(2)}};
    }
    next_item += spec.subjects;
    out.planted.push_back(normalize(rule));
    out.target_relations.push_back(head_rel);
  }

  std::vector<RelationId> noise_relations;
  for (RelationId r = 0; r < config.n_relations; ++r) {
    if (!blocked_relations.contains(r)) noise_relations.push_back(r);
  }
  if (config.noise_triples > 0 && noise_relations.empty()) {
    throw DataError("no relation is free for noise triples");
  }
  if (!noise_relations.empty()) {
    std::uniform_int_distribution<std::size_t> pick_item(0, n_items - 1);
    std::uniform_int_distribution<std::size_t> pick_rel(0, noise_relations.size() - 1);
    const std::size_t max_attempts = 50 * config.noise_triples + 1000;
    std::size_t placed = 0;
    for (std::size_t attempt = 0; placed < config.noise_triples; ++attempt) {
      if (attempt >= max_attempts) throw DataError("could not place the requested noise triples");
      const Triple t{static_cast<EntityId>(pick_item(rng)), noise_relations[pick_rel(rng)],
                     value_id(pick_value(rng))};
      if (body_patterns.contains({t.relation, t.tail})) continue;
      if (triples.insert(t).second) ++placed;
    }
  }

  std::sort(out.target_relations.begin(), out.target_relations.end());
  out.target_relations.erase(std::unique(out.target_relations.begin(), out.target_relations.end()),
                             out.target_relations.end());
  out.store = TripleStore(std::move(vocab), std::vector<Triple>(triples.begin(), triples.end()));
  return out;
}

}  // namespace xkgat
