#include "xkgat/model.hpp"

#include <numeric>

namespace xkgat {

std::vector<double> ModelConfig::layer_weights() const {
  if (!omega.empty()) return omega;
  return std::vector<double>(static_cast<std::size_t>(std::max(layers, 1)), 1.0 / std::max(layers, 1));
}

void ModelConfig::validate() const {
  if (dim < 1) throw DataError("model.dim must be >= 1");
  if (layers < 1) throw DataError("model.layers must be >= 1");
  if (max_depth < layers) throw DataError("model.max_depth must be >= model.layers");
  if (neighbor_cap < 1) throw DataError("model.neighbor_cap must be >= 1");
  if (!omega.empty()) {
    if (omega.size() != static_cast<std::size_t>(layers)) {
      throw DataError("model.omega needs one weight per layer");
    }
    for (double w : omega) {
      if (!(w >= 0.0)) throw DataError("model.omega weights must be nonnegative");
    }
    if (std::abs(std::accumulate(omega.begin(), omega.end(), 0.0) - 1.0) > 1e-9) {
      throw DataError("model.omega weights must sum to 1");
    }
  }
}

RelationTying RelationTying::from(const Vocabulary& vocab) {
  RelationTying tying;
  for (RelationId r = 0; r < vocab.num_relations(); ++r) {
    const auto& info = vocab.relation(r);
    tying.row.push_back(static_cast<Index>(info.canonical));
    tying.sign.push_back(info.is_inverse ? -1.0 : 1.0);
  }
  return tying;
}

Parameters<double> init_params(std::size_t n_entities, std::size_t n_relations, int dim,
                               std::uint64_t seed) {
  if (n_entities == 0 || n_relations == 0 || dim < 1) {
    throw DataError("init_params: counts must be positive");
  }
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  Parameters<double> params;
  params.entities.resize(static_cast<Index>(n_entities), dim);
  params.relations.resize(static_cast<Index>(n_relations), dim);
  for (Index i = 0; i < params.entities.size(); ++i) params.entities.data()[i] = uniform(rng);
  for (Index i = 0; i < params.relations.size(); ++i) params.relations.data()[i] = uniform(rng);
  return params;
}

std::string describe(const Triple& t) {
  return "(" + std::to_string(t.head) + ", " + std::to_string(t.relation) + ", " +
         std::to_string(t.tail) + ")";
}

ExampleGradient example_gradient(const TrainingPair& pair, const Parameters<double>& params,
                                 const RelationTying& tying, const ModelConfig& config,
                                 double gamma) {
  ExampleGradient out;
  const auto positive = forward(pair.positive, params, tying, config);
  const auto negative = forward(pair.negative, params, tying, config);
  if (!std::isfinite(positive.score)) {
    throw NumericError("non-finite score for " + describe(pair.positive.target()));
  }
  if (!std::isfinite(negative.score)) {
    throw NumericError("non-finite score for " + describe(pair.negative.target()));
  }
  out.loss = margin_loss(positive.score, negative.score, gamma);
  if (out.loss > 0.0) {
    backward(positive, pair.positive, tying, config.norm, 1.0, out.rows);
    backward(negative, pair.negative, tying, config.norm, -1.0, out.rows);
  }
  return out;
}

ExampleGradient transe_example_gradient(const Triple& positive, const Triple& negative,
                                        const Parameters<double>& params,
                                        const RelationTying& tying, Norm norm, double gamma) {
  ExampleGradient out;
  const double pos = transe_score(positive, params, tying, norm);
  const double neg = transe_score(negative, params, tying, norm);
  if (!std::isfinite(pos) || !std::isfinite(neg)) {
    throw NumericError("non-finite TransE score for " + describe(positive));
  }
  out.loss = margin_loss(pos, neg, gamma);
  if (out.loss > 0.0) {
    transe_backward(positive, params, tying, norm, 1.0, out.rows);
    transe_backward(negative, params, tying, norm, -1.0, out.rows);
  }
  return out;
}

Gradients<double> gradients(std::span<const TrainingPair> batch, const Parameters<double>& params,
                            const RelationTying& tying, const ModelConfig& config, double gamma) {
  if (batch.empty()) throw DataError("gradients: empty batch");
  auto grads = Gradients<double>::zeros_like(params);
  for (const auto& pair : batch) {
    auto example = example_gradient(pair, params, tying, config, gamma);
    grads.loss += example.loss;
    grads.accumulate(example.rows);
  }
  return grads;
}

NegativeSample sample_negative(const Triple& triple, std::size_t n_entities, std::mt19937_64& rng,
                               const TripleStore* filter) {
  if (n_entities < 2) throw DataError("negative sampling needs at least two entities");
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(n_entities - 2));
  NegativeSample sample;
  constexpr int kMaxRedraws = 32;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    sample.side = coin(rng) ? CorruptedSide::head : CorruptedSide::tail;
    sample.corrupted = triple;
    EntityId& slot = sample.side == CorruptedSide::head ? sample.corrupted.head : sample.corrupted.tail;
    EntityId e = pick(rng);
    if (e >= slot) ++e;  // skip the original entity
    slot = e;
    if (filter == nullptr || !filter->contains(sample.corrupted)) break;
  }
  return sample;
}

}  // namespace xkgat
