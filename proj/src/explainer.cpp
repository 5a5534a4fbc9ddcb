#include "xkgat/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xkgat/parallel.hpp"
#include "xkgat/rule_miner.hpp"

namespace xkgat {

namespace {

using InnerIt = SparseMatrix<double>::InnerIterator;

// Extends a chain that currently starts at `row` (layer `level` still to
// descend) with neighbors from C^level.
void descend(const ForwardTrace<double>& trace, const NeighborSubgraph& subgraph, const Triple& target,
             Index row, Index level, double weight, std::vector<Index>& stack,
             std::vector<Explanation>& out) {
  if (level == 0) {
    Explanation e;
    e.target = target;
    e.alpha = weight;
    e.rows.assign(stack.rbegin(), stack.rend());
    for (auto r : e.rows) e.path.push_back(subgraph.triples[static_cast<std::size_t>(r)]);
    out.push_back(std::move(e));
    return;
  }
  for (InnerIt it(trace.attention[static_cast<std::size_t>(level - 1)], row); it; ++it) {
    stack.push_back(it.col());
    descend(trace, subgraph, target, it.col(), level - 1, weight * it.value(), stack, out);
    stack.pop_back();
  }
}

}  // namespace

std::vector<Explanation> enumerate_explanations(const NeighborSubgraph& subgraph,
                                                const ForwardTrace<double>& trace) {
  if (trace.heads.rows() != subgraph.size()) throw DataError("trace does not match subgraph");
  std::vector<Explanation> out;
  std::vector<Index> stack;
  const Index target = subgraph.target_row();
  for (Index l = 1; l <= trace.layers(); ++l) {
    for (InnerIt it(trace.attention[static_cast<std::size_t>(l - 1)], target); it; ++it) {
      stack.assign(1, it.col());
      descend(trace, subgraph, subgraph.target(), it.col(), l - 1,
              trace.omega[static_cast<std::size_t>(l - 1)] * it.value(), stack, out);
    }
  }
  return out;
}

std::vector<Explanation> top_k_explanations(std::vector<Explanation> candidates, std::size_t k) {
  std::sort(candidates.begin(), candidates.end(), [](const Explanation& a, const Explanation& b) {
    if (a.alpha != b.alpha) return a.alpha > b.alpha;
    if (a.length() != b.length()) return a.length() < b.length();
    if (a.path != b.path) return a.path < b.path;
    return a.rows < b.rows;
  });
  if (candidates.size() > k) candidates.resize(k);
  return candidates;
}

std::size_t count_supports(const Explanation& explanation, const TripleStore& store) {
  const auto g = generalize(explanation, store.vocab());
  std::size_t count = count_groundings(g.rule, store);
  if (!g.binding.empty() && count > 0) {
    const auto present = [&](const Atom& a) {
      const auto value = [&](const Term& t) { return t.is_variable() ? g.binding[t.id] : t.id; };
      return store.contains({value(a.subject), a.relation, value(a.object)});
    };
    bool own = present(g.rule.head);
    for (const auto& a : g.rule.body) own = own && present(a);
    if (own) --count;
  }
  return count;
}

std::vector<Explanation> transe_explanations(const Triple& target, const Parameters<double>& params,
                                             const TripleStore& store, std::size_t k,
                                             std::size_t neighbor_cap, std::uint64_t seed) {
  ModelConfig single;
  single.dim = static_cast<int>(params.dim());
  single.layers = 1;
  single.max_depth = 1;
  single.neighbor_cap = neighbor_cap;
  single.subgraph_seed = seed;
  const auto subgraph = build_subgraph(store, target, single.subgraph_options(SubgraphMode::inference));
  const auto trace = forward(subgraph, params, RelationTying::from(store.vocab()), single);
  return top_k_explanations(enumerate_explanations(subgraph, trace), k);
}

std::vector<Explanation> explain(const Triple& target, const TripleStore& store,
                                 const Checkpoint& checkpoint, std::size_t k) {
  if (checkpoint.kind == ModelKind::transe) {
    return transe_explanations(target, checkpoint.params, store, k, checkpoint.model.neighbor_cap,
                               checkpoint.model.subgraph_seed);
  }
  const auto tying = RelationTying::from(store.vocab());
  const auto subgraph =
      build_subgraph(store, target, checkpoint.model.subgraph_options(SubgraphMode::inference));
  const auto trace = forward(subgraph, checkpoint.params, tying, checkpoint.model);
  auto all = enumerate_explanations(subgraph, trace);
  std::erase_if(all, [&](const Explanation& e) { return e.self_referential(subgraph.target_row()); });
  return top_k_explanations(std::move(all), k);
}

ExplanationReport explanation_report(std::span<const Triple> triples, const Checkpoint& checkpoint,
                                     const TripleStore& store, std::size_t k, unsigned workers) {
  if (triples.empty()) throw DataError("no triples to explain");
  if (k < 1) throw DataError("explain.k must be >= 1");
  check_compatible(checkpoint, store.vocab());
  ExplanationReport report;
  report.k = k;
  report.n_triples = triples.size();
  report.details.resize(triples.size());
  parallel_for(triples.size(), workers, [&](std::size_t i) {
    auto& d = report.details[i];
    d.target = triples[i];
    d.top = explain(triples[i], store, checkpoint, k);
    for (const auto& e : d.top) d.supports.push_back(count_supports(e, store));
  });
  double support_total = 0.0;
  for (const auto& d : report.details) {
    std::size_t triple_support = 0;
    for (auto s : d.supports) triple_support += s;
    if (triple_support == 0) continue;
    ++report.n_explained;
    support_total += static_cast<double>(triple_support);
  }
  report.recall = static_cast<double>(report.n_explained) / static_cast<double>(report.n_triples);
  if (report.n_explained > 0) {
    report.avg_support = support_total / static_cast<double>(report.n_explained);
  }
  return report;
}

namespace {

nlohmann::json triple_json(const Triple& t, const Vocabulary& vocab) {
  return nlohmann::json::array(
      {vocab.entity_name(t.head), vocab.relation_name(t.relation), vocab.entity_name(t.tail)});
}

Triple triple_from_json(const nlohmann::json& j, const Vocabulary& vocab) {
  if (!j.is_array() || j.size() != 3) throw DataError("triple must be a 3-element array");
  return {vocab.entity_id(j[0].get<std::string>()), vocab.relation_id(j[1].get<std::string>()),
          vocab.entity_id(j[2].get<std::string>())};
}

}  // namespace

void write_explanations_jsonl(std::ostream& out, std::span<const ExplainedTriple> explained,
                              const Vocabulary& vocab) {
  for (const auto& d : explained) {
    for (std::size_t i = 0; i < d.top.size(); ++i) {
      const auto& e = d.top[i];
      nlohmann::json path = nlohmann::json::array();
      nlohmann::json chain = nlohmann::json::array();
      for (const auto& t : e.path) {
        path.push_back(triple_json(canonicalize(t, vocab), vocab));
        chain.push_back(triple_json(t, vocab));
      }
      nlohmann::json line = {
          {"target", triple_json(d.target, vocab)},
          {"rank", i + 1},
          {"length", e.length()},
          {"alpha", e.alpha},
          {"support", i < d.supports.size() ? nlohmann::json(d.supports[i]) : nlohmann::json()},
          {"path", path},
          {"chain", chain},
          {"rule", format_rule(explanation_to_rule(e, vocab), vocab)},
      };
      out << line.dump() << '\n';
    }
  }
}

void write_explanations_jsonl(const std::filesystem::path& path,
                              std::span<const ExplainedTriple> explained, const Vocabulary& vocab) {
  std::ostringstream out;
  write_explanations_jsonl(out, explained, vocab);
  write_file_atomic(path, out.str());
}

std::vector<ExplainedTriple> read_explanations_jsonl(const std::filesystem::path& path,
                                                     const Vocabulary& vocab) {
  const auto lines = read_lines(path);
  std::vector<ExplainedTriple> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      Explanation e;
      e.target = triple_from_json(j.at("target"), vocab);
      e.alpha = j.at("alpha").get<double>();
      for (const auto& t : j.at("chain")) e.path.push_back(triple_from_json(t, vocab));
      if (!e.chain_valid()) throw DataError("chain does not end at the target head");
      if (out.empty() || out.back().target != e.target) out.push_back({e.target, {}, {}});
      out.back().top.push_back(std::move(e));
      const auto& support = j.at("support");
      if (!support.is_null()) out.back().supports.push_back(support.get<std::size_t>());
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path.string(), i + 1, ex.what());
    } catch (const DataError& ex) {
      throw ParseError(path.string(), i + 1, ex.what());
    }
  }
  return out;
}

}  // namespace xkgat
