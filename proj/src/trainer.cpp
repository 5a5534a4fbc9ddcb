#include "xkgat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>

#include "xkgat/evaluator.hpp"
#include "xkgat/parallel.hpp"

namespace xkgat {

void adam_step(Parameters<double>& params, const Gradients<double>& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.entities.rows() != params.entities.rows() || grads.entities.cols() != params.entities.cols() ||
      grads.relations.rows() != params.relations.rows() ||
      grads.relations.cols() != params.relations.cols()) {
    throw DataError("adam_step: gradient shape mismatch");
  }
  if (!grads.entities.allFinite() || !grads.relations.allFinite()) {
    throw NumericError("non-finite gradient in optimizer step");
  }
  ++state.step;
  adam_update(params.entities, grads.entities, state.m_entities, state.v_entities, state.step, config);
  adam_update(params.relations, grads.relations, state.m_relations, state.v_relations, state.step,
              config);
  if (!params.entities.allFinite() || !params.relations.allFinite()) {
    throw NumericError("non-finite parameters after optimizer step " + std::to_string(state.step));
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw DataError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw DataError("train.learning_rate must be > 0");
  if (!(gamma >= 0.0)) throw DataError("train.gamma must be >= 0");
  if (max_epochs < 0) throw DataError("train.max_epochs must be >= 0");
  if (patience < 1) throw DataError("train.patience must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DataError("adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw DataError("adam epsilon must be > 0");
  if (init == InitMode::checkpoint && init_checkpoint.empty()) {
    throw DataError("train.init = checkpoint needs train.init_checkpoint");
  }
}

std::string format_log_line(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.3f", r.epoch, r.mean_loss, r.valid_mrr, r.seconds);
  return buf;
}

namespace {

TrainResult run_training(ModelKind kind, const Split& split, const ModelConfig& model,
                         const TrainConfig& config, const TrainCallbacks& callbacks) {
  config.validate();
  if (kind == ModelKind::attention) {
    model.validate();
  } else if (model.dim < 1) {
    throw DataError("model.dim must be >= 1");
  }
  const TripleStore& store = split.train;
  const Vocabulary& vocab = store.vocab();
  if (store.empty()) throw DataError("training set is empty");
  if (!vocab.has_inverses()) throw DataError("training store must be inverse-augmented");
  if (config.early_stopping && config.max_epochs > 0 && split.valid.empty()) {
    throw DataError("early stopping needs a nonempty validation set");
  }

  const auto tying = RelationTying::from(vocab);
  Parameters<double> params;
  if (config.init == InitMode::checkpoint) {
    auto init = load_checkpoint(config.init_checkpoint);
    check_compatible(init, vocab);
    check_dimension(init, model.dim);
    params = std::move(init.params);
  } else {
    params = init_params(vocab.num_entities(), vocab.num_canonical_relations(), model.dim,
                         mix_seed(config.seed, 1));
  }

  TrainResult result;
  result.best = make_checkpoint(kind, params, model, vocab, config.seed);
  result.best_valid_mrr = -std::numeric_limits<double>::infinity();
  if (config.max_epochs == 0) {
    result.best_valid_mrr = std::numeric_limits<double>::quiet_NaN();
    return result;
  }

  auto adam = AdamState::zeros_like(params);
  const auto adam_config = config.adam();
  std::mt19937_64 shuffle_rng(mix_seed(config.seed, 2));
  std::mt19937_64 negative_rng(mix_seed(config.seed, 3));
  const auto positive_options = model.subgraph_options(SubgraphMode::training);
  const auto negative_options = model.subgraph_options(SubgraphMode::inference);

  const auto all = store.triples();
  std::vector<std::uint32_t> order(all.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::optional<NeighborSubgraph>> cache(config.cache_subgraphs ? all.size() : 0);

  std::vector<Triple> valid_filter(all.begin(), all.end());
  valid_filter.insert(valid_filter.end(), split.valid.begin(), split.valid.end());
  const auto filter_set = make_filter_set({valid_filter});

  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<Triple> negatives(count);
      for (std::size_t i = 0; i < count; ++i) {
        negatives[i] = sample_negative(all[order[start + i]], vocab.num_entities(), negative_rng,
                                       config.filter_negatives ? &store : nullptr)
                           .corrupted;
      }
      std::vector<ExampleGradient> examples(count);
      parallel_for(count, config.workers, [&](std::size_t i) {
        const auto position = order[start + i];
        const Triple& positive = all[position];
        if (kind == ModelKind::transe) {
          examples[i] = transe_example_gradient(positive, negatives[i], params, tying, model.norm,
                                                config.gamma);
          return;
        }
        TrainingPair pair;
        if (config.cache_subgraphs) {
          if (!cache[position]) cache[position] = build_subgraph(store, positive, positive_options);
          pair.positive = *cache[position];
        } else {
          pair.positive = build_subgraph(store, positive, positive_options);
        }
        pair.negative = build_subgraph(store, negatives[i], negative_options);
        examples[i] = example_gradient(pair, params, tying, model, config.gamma);
      });
      auto grads = Gradients<double>::zeros_like(params);
      for (const auto& example : examples) {
        grads.loss += example.loss;
        grads.accumulate(example.rows);
      }
      total_loss += grads.loss;
      adam_step(params, grads, adam, adam_config);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = total_loss / static_cast<double>(order.size());
    record.valid_mrr = std::numeric_limits<double>::quiet_NaN();
    if (!split.valid.empty()) {
      const TailScorer scorer(store, params, model, kind);
      record.valid_mrr = filtered_mrr(split.valid, scorer, filter_set, config.workers);
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(record);
    if (callbacks.on_epoch) callbacks.on_epoch(record);

    const bool improved = split.valid.empty() || !config.early_stopping ||
                          record.valid_mrr > result.best_valid_mrr;
    if (improved) {
      result.best = make_checkpoint(kind, params, model, vocab, config.seed);
      result.best.epoch = epoch;
      result.best.iteration = adam.step;
      result.best_epoch = epoch;
      result.best_valid_mrr = record.valid_mrr;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace

TrainResult train(const Split& split, const ModelConfig& model, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  return run_training(ModelKind::attention, split, model, config, callbacks);
}

TrainResult pretrain_transe(const Split& split, const ModelConfig& model, const TrainConfig& config,
                            const TrainCallbacks& callbacks) {
  return run_training(ModelKind::transe, split, model, config, callbacks);
}

}  // namespace xkgat
