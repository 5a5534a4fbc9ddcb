#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "xkgat/kg_store.hpp"
#include "xkgat/model.hpp"
#include "xkgat/neighbor_graph.hpp"
#include "xkgat/rule.hpp"
#include "xkgat/synthetic.hpp"

namespace fixtures {

using namespace xkgat;

inline TripleStore make_store(std::initializer_list<std::array<const char*, 3>> rows,
                              bool with_inverses = false) {
  auto vocab = std::make_shared<Vocabulary>();
  std::vector<Triple> triples;
  for (const auto& r : rows) {
    const auto h = vocab->intern_entity(r[0]);
    const auto rel = vocab->intern_relation(r[1]);
    const auto t = vocab->intern_entity(r[2]);
    triples.push_back({h, rel, t});
  }
  TripleStore store(vocab, triples);
  return with_inverses ? augment_inverses(store) : store;
}

inline Triple triple(const TripleStore& s, const char* h, const char* r, const char* t) {
  const auto& v = s.vocab();
  return {v.entity_id(h), v.relation_id(r), v.entity_id(t)};
}

/// Random store over `n_entities` e<i> and `n_relations` r<k> names.
inline TripleStore random_store(std::mt19937_64& rng, std::size_t n_entities, std::size_t n_relations,
                                std::size_t n_triples, bool with_inverses) {
  auto vocab = std::make_shared<Vocabulary>();
  for (std::size_t i = 0; i < n_entities; ++i) vocab->intern_entity("e" + std::to_string(i));
  for (std::size_t k = 0; k < n_relations; ++k) vocab->intern_relation("r" + std::to_string(k));
  std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(n_entities - 1));
  std::uniform_int_distribution<RelationId> rel(0, static_cast<RelationId>(n_relations - 1));
  std::vector<Triple> triples;
  for (std::size_t i = 0; i < n_triples; ++i) triples.push_back({ent(rng), rel(rng), ent(rng)});
  TripleStore store(vocab, triples);
  return with_inverses ? augment_inverses(store) : store;
}

/// Random subgraph with target last and random edges following the
/// tail(N_j) == head(N_i) rule over a small entity pool.
inline NeighborSubgraph random_subgraph(std::mt19937_64& rng, int n, int n_entities, int n_relations) {
  std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(n_entities - 1));
  std::uniform_int_distribution<RelationId> rel(0, static_cast<RelationId>(n_relations - 1));
  std::vector<Triple> triples;
  for (int i = 0; i < n; ++i) triples.push_back({ent(rng), rel(rng), ent(rng)});
  return make_subgraph(triples, std::vector<int>(static_cast<std::size_t>(n), 1));
}

inline Parameters<double> random_params(std::mt19937_64& rng, int n_entities, int n_relations, int d,
                                        double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Parameters<double> p;
  p.entities.resize(n_entities, d);
  p.relations.resize(n_relations, d);
  for (Index i = 0; i < p.entities.size(); ++i) p.entities.data()[i] = u(rng);
  for (Index i = 0; i < p.relations.size(); ++i) p.relations.data()[i] = u(rng);
  return p;
}

/// Tying for `n` canonical relations followed by their inverses.
inline RelationTying paired_tying(int n) {
  RelationTying t;
  for (int r = 0; r < n; ++r) {
    t.row.push_back(r);
    t.sign.push_back(1.0);
  }
  for (int r = 0; r < n; ++r) {
    t.row.push_back(r);
    t.sign.push_back(-1.0);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Brute-force join oracle: every variable ranges over every entity.

struct Oracle {
  std::set<Triple> facts;
  std::size_t n_entities;

  explicit Oracle(const TripleStore& store)
      : facts(store.triples().begin(), store.triples().end()), n_entities(store.vocab().num_entities()) {}

  static std::vector<std::uint32_t> variables(const std::vector<Atom>& atoms) {
    std::set<std::uint32_t> vars;
    for (const auto& a : atoms) {
      if (a.subject.is_variable()) vars.insert(a.subject.id);
      if (a.object.is_variable()) vars.insert(a.object.id);
    }
    return {vars.begin(), vars.end()};
  }

  bool holds(const Atom& a, const std::map<std::uint32_t, EntityId>& b) const {
    auto v = [&](const Term& t) { return t.is_variable() ? b.at(t.id) : t.id; };
    return facts.contains({v(a.subject), a.relation, v(a.object)});
  }

  template <typename Fn>
  void assignments(const std::vector<std::uint32_t>& vars, std::map<std::uint32_t, EntityId> b, Fn&& fn,
                   std::size_t i = 0) const {
    if (i == vars.size()) {
      fn(b);
      return;
    }
    for (EntityId e = 0; e < n_entities; ++e) {
      b[vars[i]] = e;
      assignments(vars, b, fn, i + 1);
    }
  }

  std::size_t count_groundings(const Rule& rule) const {
    std::vector<Atom> atoms{rule.head};
    atoms.insert(atoms.end(), rule.body.begin(), rule.body.end());
    std::size_t n = 0;
    assignments(variables(atoms), {}, [&](const auto& b) {
      bool ok = true;
      for (const auto& a : atoms) ok = ok && holds(a, b);
      n += ok;
    });
    return n;
  }

  /// (support, head_size)
  std::pair<std::size_t, std::size_t> head_coverage(const Rule& rule) const {
    const auto head_vars = variables({rule.head});
    std::vector<std::uint32_t> rest;
    for (auto v : variables(rule.body)) {
      if (std::find(head_vars.begin(), head_vars.end(), v) == head_vars.end()) rest.push_back(v);
    }
    std::size_t support = 0, head_size = 0;
    assignments(head_vars, {}, [&](const auto& b) {
      if (!holds(rule.head, b)) return;
      ++head_size;
      bool found = false;
      assignments(rest, b, [&](const auto& full) {
        if (found) return;
        bool ok = true;
        for (const auto& a : rule.body) ok = ok && holds(a, full);
        found = ok;
      });
      support += found;
    });
    return {support, head_size};
  }

  std::set<Triple> apply(const std::vector<Rule>& rules) const {
    std::set<Triple> out;
    for (const auto& rule : rules) {
      assignments(variables(rule.body), {}, [&](const auto& b) {
        for (const auto& a : rule.body) {
          if (!holds(a, b)) return;
        }
        auto v = [&](const Term& t) { return t.is_variable() ? b.at(t.id) : t.id; };
        const Triple head{v(rule.head.subject), rule.head.relation, v(rule.head.object)};
        if (!facts.contains(head)) out.insert(head);
      });
    }
    return out;
  }
};

/// Small planted KG: rel0 <= rel1 (association) and rel2 <= rel3 (path) over
/// 15 subjects each, plus noise on rel1; split with inverse-augmented train.
inline SyntheticConfig tiny_synthetic(std::uint64_t seed = 1) {
  SyntheticConfig config;
  config.n_entities = 60;
  config.n_relations = 4;
  config.n_values = 20;
  config.rules = {{RuleKind::association, 0, 1, 15, 1.0}, {RuleKind::path, 2, 3, 15, 1.0}};
  config.noise_triples = 30;
  config.seed = seed;
  return config;
}

inline Split tiny_split(std::uint64_t seed = 1) {
  auto kg = generate_synthetic(tiny_synthetic(seed));
  SplitOptions options;
  options.test_fraction = 0.2;
  options.valid_fraction = 0.1;
  options.seed = seed;
  auto split = split_dataset(kg.store, kg.target_relations, options);
  split.train = augment_inverses(split.train);
  return split;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("xkgat_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
