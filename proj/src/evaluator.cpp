#include "xkgat/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "xkgat/parallel.hpp"

namespace xkgat {

TailScorer::TailScorer(const TripleStore& store, const Parameters<double>& params,
                       const ModelConfig& config, ModelKind kind)
    : store_(store),
      params_(params),
      config_(config),
      kind_(kind),
      tying_(RelationTying::from(store.vocab())),
      omega_(config.layer_weights()) {
  if (static_cast<std::size_t>(params.entities.rows()) != store.vocab().num_entities() ||
      static_cast<std::size_t>(params.relations.rows()) != store.vocab().num_canonical_relations()) {
    throw DataError("embedding tables do not match the store vocabulary");
  }
  if (kind == ModelKind::attention) config_.validate();
}

double TailScorer::score(const Triple& triple) const {
  if (kind_ == ModelKind::transe) return transe_score(triple, params_, tying_, config_.norm);
  const auto subgraph =
      build_subgraph(store_, triple, config_.subgraph_options(SubgraphMode::inference));
  return forward(subgraph, params_, tying_, config_).score;
}

std::vector<double> TailScorer::score_tails(EntityId head, RelationId relation) const {
  const auto n_entities = static_cast<EntityId>(store_.vocab().num_entities());
  std::vector<double> scores(n_entities);
  if (kind_ == ModelKind::transe) {
    const RowVector<double> query = params_.entities.row(head) + params_.relation(tying_, relation);
    for (EntityId e = 0; e < n_entities; ++e) {
      scores[e] = xkgat::score(query, RowVector<double>::Zero(query.size()),
                               params_.entities.row(e), config_.norm);
    }
    return scores;
  }

  // Candidates whose subgraph differs from the shared one beyond the target row.
  const auto& vocab = store_.vocab();
  const auto stored = [&](EntityId e) {
    const Triple t{head, relation, e};
    if (store_.contains(t)) return true;
    const auto inverse = inverse_of(t, vocab);
    return inverse && store_.contains(*inverse);
  };
  EntityId placeholder = 0;
  while (placeholder < n_entities && stored(placeholder)) ++placeholder;
  if (placeholder == n_entities) {
    for (EntityId e = 0; e < n_entities; ++e) scores[e] = score({head, relation, e});
    return scores;
  }

  const auto base =
      build_subgraph(store_, {head, relation, placeholder}, config_.subgraph_options(SubgraphMode::inference));
  const Index n = base.size();
  const Index target = n - 1;
  std::unordered_set<EntityId> special;
  for (Index i = 0; i < target; ++i) special.insert(base.triples[static_cast<std::size_t>(i)].head);

  SparseMatrix<double> adjacency = base.adjacency;
  adjacency.prune([target](Index, Index col, double) { return col != target; });
  Matrix<double> heads, relations, tails;
  gather(base, params_, tying_, heads, relations, tails);
  const auto trace = forward_matrices<double>(adjacency, std::move(heads), std::move(relations),
                                              std::move(tails), omega_, config_.norm);

  std::vector<Index> neighbors;
  for (SparseMatrix<double>::InnerIterator it(adjacency, target); it; ++it) neighbors.push_back(it.col());
  const auto degree = static_cast<Index>(neighbors.size());
  const Index d = params_.dim();
  // P^k rows: S^{k-1}_j + R_j for the target's neighbors j.
  std::vector<Matrix<double>> shared_tails;
  for (Index k = 0; k < trace.layers(); ++k) {
    const Matrix<double>& input = k == 0 ? trace.heads : trace.outputs[static_cast<std::size_t>(k - 1)];
    Matrix<double> p(degree, d);
    for (Index j = 0; j < degree; ++j) {
      p.row(j) = input.row(neighbors[static_cast<std::size_t>(j)]) +
                 trace.relations.row(neighbors[static_cast<std::size_t>(j)]);
    }
    shared_tails.push_back(std::move(p));
  }
  const RowVector<double> rel = params_.relation(tying_, relation);
  const RowVector<double> head_row = params_.entities.row(head);

  Eigen::VectorXd logits(degree);
  for (EntityId e = 0; e < n_entities; ++e) {
    if (special.contains(e) || stored(e)) {
      scores[e] = score({head, relation, e});
      continue;
    }
    const RowVector<double> query = params_.entities.row(e) - rel;
    RowVector<double> state = head_row;
    RowVector<double> representation = RowVector<double>::Zero(d);
    for (Index k = 0; k < trace.layers(); ++k) {
      if (degree > 0) {
        logits = shared_tails[static_cast<std::size_t>(k)] * query.transpose();
        logits = (logits.array() - logits.maxCoeff()).exp();
        logits /= logits.sum();
        state = logits.transpose() * shared_tails[static_cast<std::size_t>(k)];
      }
      representation += omega_[static_cast<std::size_t>(k)] * state;
    }
    scores[e] = xkgat::score(representation, rel, params_.entities.row(e), config_.norm);
  }
  return scores;
}

RankResult rank_from_scores(const Triple& test, std::span<const double> scores,
                            const TripleSet& filter_set) {
  if (test.tail >= scores.size()) throw DataError("test tail outside the candidate range");
  const double truth = scores[test.tail];
  if (!std::isfinite(truth)) throw NumericError("non-finite score for " + describe(test));
  RankResult out{test, 1, 1};
  for (EntityId e = 0; e < scores.size(); ++e) {
    if (e == test.tail) continue;
    if (!std::isfinite(scores[e])) throw NumericError("non-finite candidate score");
    if (scores[e] > truth) continue;
    ++out.raw_rank;
    if (!filter_set.contains({test.head, test.relation, e})) ++out.filtered_rank;
  }
  return out;
}

RankResult rank_tail(const Triple& test, const TailScorer& scorer, const TripleSet& filter_set) {
  const auto scores = scorer.score_tails(test.head, test.relation);
  return rank_from_scores(test, scores, filter_set);
}

MetricReport compute_metrics(std::span<const RankResult> ranks, RankSetting setting) {
  if (ranks.empty()) throw DataError("metrics need at least one ranked triple");
  MetricReport report;
  report.setting = setting;
  report.n_test = ranks.size();
  double reciprocal = 0.0;
  std::map<int, std::size_t> hits;
  for (const auto& r : ranks) {
    const auto rank = setting == RankSetting::raw ? r.raw_rank : r.filtered_rank;
    reciprocal += 1.0 / static_cast<double>(rank);
    for (int k : kHitsAt) {
      if (rank <= static_cast<std::size_t>(k)) ++hits[k];
    }
  }
  const auto n = static_cast<double>(ranks.size());
  report.mrr = reciprocal / n;
  for (int k : kHitsAt) report.hits[k] = static_cast<double>(hits[k]) / n;
  return report;
}

TripleSet make_filter_set(std::initializer_list<std::span<const Triple>> parts) {
  TripleSet out;
  for (auto part : parts) out.insert(part.begin(), part.end());
  return out;
}

namespace {

std::vector<RankResult> rank_all(std::span<const Triple> queries, const TailScorer& scorer,
                                 const TripleSet& filter_set, unsigned workers) {
  std::vector<RankResult> ranks(queries.size());
  parallel_for(queries.size(), workers,
               [&](std::size_t i) { ranks[i] = rank_tail(queries[i], scorer, filter_set); });
  return ranks;
}

}  // namespace

double filtered_mrr(std::span<const Triple> triples, const TailScorer& scorer,
                    const TripleSet& filter_set, unsigned workers) {
  const auto ranks = rank_all(triples, scorer, filter_set, workers);
  return compute_metrics(ranks, RankSetting::filter).mrr;
}

PlpReport run_plp(const Split& split, const Checkpoint& checkpoint, const ModelConfig& config,
                  const PlpOptions& options) {
  if (split.test.empty()) throw DataError("test set is empty");
  const auto& vocab = split.train.vocab();
  check_compatible(checkpoint, vocab);
  if (options.head_side && !vocab.has_inverses()) {
    throw DataError("head-side ranking needs an inverse-augmented store");
  }
  for (const auto& t : split.test) {
    if (std::find(split.target_relations.begin(), split.target_relations.end(), t.relation) ==
        split.target_relations.end()) {
      throw DataError("test triple " + describe(t) + " does not use a target relation");
    }
  }

  std::vector<Triple> queries(split.test.begin(), split.test.end());
  std::vector<Triple> known;
  for (auto part : {std::span<const Triple>(split.train.triples()), std::span<const Triple>(split.valid),
                    std::span<const Triple>(split.test)}) {
    known.insert(known.end(), part.begin(), part.end());
  }
  if (options.head_side) {
    for (const auto& t : split.test) queries.push_back(*inverse_of(t, vocab));
    for (auto part : {std::span<const Triple>(split.valid), std::span<const Triple>(split.test)}) {
      for (const auto& t : part) known.push_back(*inverse_of(t, vocab));
    }
  }
  const auto filter_set = make_filter_set({known});

  const TailScorer scorer(split.train, checkpoint.params, config, checkpoint.kind);
  PlpReport report;
  report.ranks = rank_all(queries, scorer, filter_set, options.workers);
  report.raw = compute_metrics(report.ranks, RankSetting::raw);
  report.filtered = compute_metrics(report.ranks, RankSetting::filter);
  return report;
}

const char* to_string(RankSetting setting) {
  return setting == RankSetting::raw ? "raw" : "filter";
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_metrics(const PlpReport& report) {
  std::string out;
  for (const auto* m : {&report.raw, &report.filtered}) {
    const std::string setting = to_string(m->setting);
    out += "MRR\t" + setting + "\t" + fixed(m->mrr) + "\n";
    for (int k : kHitsAt) {
      out += "Hit@" + std::to_string(k) + "\t" + setting + "\t" + fixed(m->hits.at(k)) + "\n";
    }
  }
  out += "n_test\tall\t" + std::to_string(report.raw.n_test) + "\n";
  return out;
}

std::string format_metrics_table(const PlpReport& report, const std::string& method) {
  std::string out = "method\tsetting\tMRR\tHit@10\tHit@3\tHit@1\n";
  for (const auto* m : {&report.raw, &report.filtered}) {
    out += method + "\t" + to_string(m->setting) + "\t" + fixed(m->mrr) + "\t" +
           fixed(m->hits.at(10)) + "\t" + fixed(m->hits.at(3)) + "\t" + fixed(m->hits.at(1)) + "\n";
  }
  return out;
}

}  // namespace xkgat
