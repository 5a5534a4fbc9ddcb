#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xkgat/kg_store.hpp"
#include "xkgat/neighbor_graph.hpp"
#include "xkgat/types.hpp"

namespace xkgat {

enum class Norm { l1, l2 };

struct ModelConfig {
  int dim = 100;
  int layers = 2;
  /// Per-layer weights of the head representation; empty means 1/layers each.
  std::vector<double> omega;
  Norm norm = Norm::l1;
  int max_depth = 2;
  std::size_t neighbor_cap = 1000;
  std::uint64_t subgraph_seed = 0;

  std::vector<double> layer_weights() const;
  /// Throws DataError on an inconsistent configuration.
  void validate() const;
  SubgraphOptions subgraph_options(SubgraphMode mode) const {
    return {max_depth, neighbor_cap, subgraph_seed, mode};
  }
};

/// Maps a relation id to its row in the canonical relation table and the
/// sign of the lookup: r~inv reads -row(r).
struct RelationTying {
  std::vector<Index> row;
  std::vector<double> sign;

  static RelationTying from(const Vocabulary& vocab);
};

template <typename Scalar>
struct Parameters {
  Matrix<Scalar> entities;   // |E| x d
  Matrix<Scalar> relations;  // |R canonical| x d

  Index dim() const noexcept { return entities.cols(); }

  RowVector<Scalar> relation(const RelationTying& tying, RelationId r) const {
    return Scalar(tying.sign[r]) * relations.row(tying.row[r]);
  }

  template <typename Other>
  Parameters<Other> cast() const {
    return {entities.template cast<Other>(), relations.template cast<Other>()};
  }
};

/// Entries i.i.d. uniform on [-6/sqrt(d), 6/sqrt(d)], entities first, row-major.
Parameters<double> init_params(std::size_t n_entities, std::size_t n_relations, int dim,
                               std::uint64_t seed);

std::string describe(const Triple& t);

// ---------------------------------------------------------------------------
// Scoring

/// ||head + relation - tail|| in the chosen norm. Lower is more plausible.
template <typename D1, typename D2, typename D3>
typename D1::Scalar score(const Eigen::MatrixBase<D1>& head, const Eigen::MatrixBase<D2>& relation,
                          const Eigen::MatrixBase<D3>& tail, Norm norm) {
  const auto residual = (head + relation - tail).eval();
  return norm == Norm::l1 ? residual.cwiseAbs().sum() : residual.norm();
}

/// d score / d residual. The L1 subgradient at a zero coordinate is 0, and the
/// L2 gradient at a zero residual is 0.
template <typename Scalar>
RowVector<Scalar> score_gradient(const RowVector<Scalar>& residual, Norm norm) {
  if (norm == Norm::l1) {
    return residual.unaryExpr([](Scalar v) {
      return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
    });
  }
  const Scalar length = residual.norm();
  if (length == Scalar(0)) return RowVector<Scalar>::Zero(residual.size());
  return residual / length;
}

inline double margin_loss(double positive_score, double negative_score, double gamma) {
  return std::max(0.0, positive_score + gamma - negative_score);
}

template <typename Scalar>
Scalar transe_score(const Triple& t, const Parameters<Scalar>& params, const RelationTying& tying,
                    Norm norm) {
  return score(params.entities.row(t.head), params.relation(tying, t.relation),
               params.entities.row(t.tail), norm);
}

// ---------------------------------------------------------------------------
// Attention layer

template <typename Scalar>
struct LayerResult {
  Matrix<Scalar> output;            // S+
  SparseMatrix<Scalar> attention;   // C^n, supported on the adjacency pattern
  std::vector<bool> fallback;       // rows without neighbors
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

}  // namespace detail

/// One attention layer:
///   S^t = H + R, S^h = T - R, C_ij = S^h_i . S^t_j on adjacent pairs,
///   C^n = row-wise softmax over the adjacent entries,
///   S+_i = sum_j C^n_ij S^t_j, or H_i for a row without neighbors.
template <typename Scalar>
LayerResult<Scalar> basic_layer(const SparseMatrix<double>& adjacency, const Matrix<Scalar>& heads,
                                const Matrix<Scalar>& relations, const Matrix<Scalar>& tails) {
  const Index n = heads.rows();
  if (relations.rows() != n || tails.rows() != n || relations.cols() != heads.cols() ||
      tails.cols() != heads.cols() || adjacency.rows() != n || adjacency.cols() != n) {
    throw DataError("basic_layer: shape mismatch");
  }
  detail::require_finite(heads, "layer heads");
  detail::require_finite(relations, "layer relations");
  detail::require_finite(tails, "layer tails");

  const Matrix<Scalar> shared_tail = heads + relations;
  const Matrix<Scalar> shared_head = tails - relations;

  using InnerIt = typename SparseMatrix<Scalar>::InnerIterator;
  LayerResult<Scalar> out;
  out.attention = adjacency.template cast<Scalar>();
  out.fallback.assign(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    Scalar max_logit = -std::numeric_limits<Scalar>::infinity();
    bool any = false;
    for (InnerIt it(out.attention, i); it; ++it) {
      it.valueRef() = shared_head.row(i).dot(shared_tail.row(it.col()));
      max_logit = std::max(max_logit, it.value());
      any = true;
    }
    if (!any) {
      out.fallback[static_cast<std::size_t>(i)] = true;
      continue;
    }
    Scalar total = 0;
    for (InnerIt it(out.attention, i); it; ++it) {
      it.valueRef() = std::exp(it.value() - max_logit);
      total += it.value();
    }
    for (InnerIt it(out.attention, i); it; ++it) it.valueRef() /= total;
  }
  out.output = out.attention * shared_tail;
  for (Index i = 0; i < n; ++i) {
    if (out.fallback[static_cast<std::size_t>(i)]) out.output.row(i) = heads.row(i);
  }
  return out;
}

template <typename Scalar>
struct ForwardTrace {
  Matrix<Scalar> heads;       // H
  Matrix<Scalar> relations;   // R
  Matrix<Scalar> tails;       // T
  std::vector<SparseMatrix<Scalar>> attention;  // C^1 .. C^m
  std::vector<Matrix<Scalar>> outputs;          // S^1 .. S^m
  std::vector<bool> fallback;
  std::vector<Scalar> omega;
  RowVector<Scalar> head_representation;  // s^h
  Scalar score = 0;

  Index layers() const noexcept { return static_cast<Index>(outputs.size()); }
  Index target_row() const noexcept { return heads.rows() - 1; }
};

/// Stacks `omega.size()` layers; layer k reads S^{k-1} (S^0 = H) as its heads.
/// The last row is the target; its head representation is sum_k omega_k S^k_n.
template <typename Scalar>
ForwardTrace<Scalar> forward_matrices(const SparseMatrix<double>& adjacency, Matrix<Scalar> heads,
                                      Matrix<Scalar> relations, Matrix<Scalar> tails,
                                      std::span<const double> omega, Norm norm) {
  if (omega.empty()) throw DataError("forward needs at least one layer");
  if (heads.rows() == 0) throw DataError("forward needs a nonempty subgraph");
  ForwardTrace<Scalar> trace;
  trace.heads = std::move(heads);
  trace.relations = std::move(relations);
  trace.tails = std::move(tails);
  const Index n = trace.heads.rows();
  trace.head_representation = RowVector<Scalar>::Zero(trace.heads.cols());
  for (std::size_t k = 0; k < omega.size(); ++k) {
    const Matrix<Scalar>& input = k == 0 ? trace.heads : trace.outputs.back();
    auto layer = basic_layer<Scalar>(adjacency, input, trace.relations, trace.tails);
    trace.head_representation += Scalar(omega[k]) * layer.output.row(n - 1);
    trace.omega.push_back(Scalar(omega[k]));
    trace.attention.push_back(std::move(layer.attention));
    trace.outputs.push_back(std::move(layer.output));
    trace.fallback = std::move(layer.fallback);
  }
  trace.score = score(trace.head_representation, trace.relations.row(n - 1),
                      trace.tails.row(n - 1), norm);
  return trace;
}

template <typename Scalar>
void gather(const NeighborSubgraph& subgraph, const Parameters<Scalar>& params,
            const RelationTying& tying, Matrix<Scalar>& heads, Matrix<Scalar>& relations,
            Matrix<Scalar>& tails) {
  const Index n = subgraph.size();
  const Index d = params.dim();
  heads.resize(n, d);
  relations.resize(n, d);
  tails.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    const auto& t = subgraph.triples[static_cast<std::size_t>(i)];
    heads.row(i) = params.entities.row(t.head);
    relations.row(i) = params.relation(tying, t.relation);
    tails.row(i) = params.entities.row(t.tail);
  }
}

template <typename Scalar>
ForwardTrace<Scalar> forward(const NeighborSubgraph& subgraph, const Parameters<Scalar>& params,
                             const RelationTying& tying, const ModelConfig& config) {
  Matrix<Scalar> heads, relations, tails;
  gather(subgraph, params, tying, heads, relations, tails);
  const auto omega = config.layer_weights();
  return forward_matrices<Scalar>(subgraph.adjacency, std::move(heads), std::move(relations),
                                  std::move(tails), omega, config.norm);
}

// ---------------------------------------------------------------------------
// Gradients

/// Gradients of `coefficient * score` with respect to the gathered H, R, T.
template <typename Scalar>
void backward_matrices(const ForwardTrace<Scalar>& trace, Norm norm, Scalar coefficient,
                       Matrix<Scalar>& d_heads, Matrix<Scalar>& d_relations,
                       Matrix<Scalar>& d_tails) {
  using InnerIt = typename SparseMatrix<Scalar>::InnerIterator;
  const Index n = trace.heads.rows();
  const Index d = trace.heads.cols();
  const Index target = n - 1;

  const RowVector<Scalar> residual =
      trace.head_representation + trace.relations.row(target) - trace.tails.row(target);
  const RowVector<Scalar> g = coefficient * score_gradient<Scalar>(residual, norm);

  d_relations = Matrix<Scalar>::Zero(n, d);
  d_tails = Matrix<Scalar>::Zero(n, d);
  d_relations.row(target) += g;
  d_tails.row(target) -= g;

  Matrix<Scalar> d_output = Matrix<Scalar>::Zero(n, d);
  for (Index k = trace.layers() - 1; k >= 0; --k) {
    d_output.row(target) += trace.omega[static_cast<std::size_t>(k)] * g;
    const Matrix<Scalar>& input = k == 0 ? trace.heads : trace.outputs[static_cast<std::size_t>(k - 1)];
    const Matrix<Scalar> shared_tail = input + trace.relations;
    const Matrix<Scalar> shared_head = trace.tails - trace.relations;
    const auto& attention = trace.attention[static_cast<std::size_t>(k)];

    Matrix<Scalar> d_input = Matrix<Scalar>::Zero(n, d);
    for (Index i = 0; i < n; ++i) {
      if (trace.fallback[static_cast<std::size_t>(i)]) d_input.row(i) += d_output.row(i);
    }
    // softmax backward: dZ_ij = C_ij (dC_ij - sum_l C_il dC_il), dC_ij = dS_i . S^t_j
    SparseMatrix<Scalar> d_logits = attention;
    for (Index i = 0; i < n; ++i) {
      Scalar weighted = 0;
      for (InnerIt it(d_logits, i); it; ++it) {
        const Scalar d_weight = d_output.row(i).dot(shared_tail.row(it.col()));
        weighted += it.value() * d_weight;
        it.valueRef() = d_weight;
      }
      InnerIt c_it(attention, i);
      for (InnerIt it(d_logits, i); it; ++it, ++c_it) {
        it.valueRef() = c_it.value() * (it.value() - weighted);
      }
    }
    Matrix<Scalar> d_shared_tail = attention.transpose() * d_output;
    d_shared_tail += d_logits.transpose() * shared_head;
    const Matrix<Scalar> d_shared_head = d_logits * shared_tail;

    d_input += d_shared_tail;
    d_relations += d_shared_tail - d_shared_head;
    d_tails += d_shared_head;
    d_output = std::move(d_input);
  }
  d_heads = std::move(d_output);
}

/// Row-sparse gradient contributions, in subgraph row order.
template <typename Scalar>
struct RowGradients {
  std::vector<std::pair<Index, RowVector<Scalar>>> entities;
  std::vector<std::pair<Index, RowVector<Scalar>>> relations;

  void clear() {
    entities.clear();
    relations.clear();
  }
};

/// Back-propagates `coefficient * score` of a traced subgraph into embedding
/// rows. Inverse-relation rows flow to their canonical row with a sign flip.
template <typename Scalar>
void backward(const ForwardTrace<Scalar>& trace, const NeighborSubgraph& subgraph,
              const RelationTying& tying, Norm norm, Scalar coefficient, RowGradients<Scalar>& out) {
  Matrix<Scalar> d_heads, d_relations, d_tails;
  backward_matrices(trace, norm, coefficient, d_heads, d_relations, d_tails);
  if (!d_heads.allFinite() || !d_relations.allFinite() || !d_tails.allFinite()) {
    throw NumericError("non-finite gradient for target " + describe(subgraph.target()));
  }
  for (Index i = 0; i < subgraph.size(); ++i) {
    const auto& t = subgraph.triples[static_cast<std::size_t>(i)];
    out.entities.emplace_back(t.head, d_heads.row(i));
    out.entities.emplace_back(t.tail, d_tails.row(i));
    out.relations.emplace_back(tying.row[t.relation], Scalar(tying.sign[t.relation]) * d_relations.row(i));
  }
}

template <typename Scalar>
void transe_backward(const Triple& t, const Parameters<Scalar>& params, const RelationTying& tying,
                     Norm norm, Scalar coefficient, RowGradients<Scalar>& out) {
  const RowVector<Scalar> residual =
      params.entities.row(t.head) + params.relation(tying, t.relation) - params.entities.row(t.tail);
  const RowVector<Scalar> g = coefficient * score_gradient<Scalar>(residual, norm);
  out.entities.emplace_back(t.head, g);
  out.entities.emplace_back(t.tail, -g);
  out.relations.emplace_back(tying.row[t.relation], Scalar(tying.sign[t.relation]) * g);
}

template <typename Scalar>
struct Gradients {
  Matrix<Scalar> entities;
  Matrix<Scalar> relations;
  Scalar loss = 0;

  static Gradients zeros_like(const Parameters<Scalar>& params) {
    return {Matrix<Scalar>::Zero(params.entities.rows(), params.entities.cols()),
            Matrix<Scalar>::Zero(params.relations.rows(), params.relations.cols()), Scalar(0)};
  }

  void accumulate(const RowGradients<Scalar>& rows) {
    for (const auto& [row, g] : rows.entities) entities.row(row) += g;
    for (const auto& [row, g] : rows.relations) relations.row(row) += g;
  }
};

struct TrainingPair {
  NeighborSubgraph positive;
  NeighborSubgraph negative;
};

struct ExampleGradient {
  double loss = 0.0;
  RowGradients<double> rows;
};

/// Margin loss of one positive/negative pair and its row gradients. A
/// satisfied margin yields zero loss and no rows.
ExampleGradient example_gradient(const TrainingPair& pair, const Parameters<double>& params,
                                 const RelationTying& tying, const ModelConfig& config,
                                 double gamma);
ExampleGradient transe_example_gradient(const Triple& positive, const Triple& negative,
                                        const Parameters<double>& params,
                                        const RelationTying& tying, Norm norm, double gamma);

/// Summed margin loss over the batch and its dense gradients.
Gradients<double> gradients(std::span<const TrainingPair> batch, const Parameters<double>& params,
                            const RelationTying& tying, const ModelConfig& config, double gamma);

// ---------------------------------------------------------------------------
// Negative sampling

enum class CorruptedSide { head, tail };

struct NegativeSample {
  Triple corrupted;
  CorruptedSide side = CorruptedSide::tail;
};

/// Replaces the head or the tail (probability 1/2 each) with a uniformly drawn
/// different entity. With `filter`, redraws (bounded) while the corruption is
/// a stored triple.
NegativeSample sample_negative(const Triple& triple, std::size_t n_entities, std::mt19937_64& rng,
                               const TripleStore* filter = nullptr);

}  // namespace xkgat
