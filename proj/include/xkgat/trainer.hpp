#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xkgat/checkpoint.hpp"
#include "xkgat/kg_store.hpp"
#include "xkgat/model.hpp"
#include "xkgat/optimizer.hpp"

namespace xkgat {

enum class InitMode { uniform, checkpoint };

struct TrainConfig {
  std::size_t batch_size = 100;
  double learning_rate = 1e-4;
  double gamma = 2.0;
  int max_epochs = 5;
  bool early_stopping = true;
  /// Epochs without a validation MRR improvement before stopping.
  int patience = 2;
  std::uint64_t seed = 0;
  InitMode init = InitMode::uniform;
  std::filesystem::path init_checkpoint;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Redraw negatives that are stored triples.
  bool filter_negatives = false;
  /// Keep positive subgraphs across epochs.
  bool cache_subgraphs = false;
  unsigned workers = 1;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double valid_mrr = 0.0;  // NaN without a validation set
  double seconds = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  double best_valid_mrr = 0.0;
  int best_epoch = 0;
};

/// Trains the attention model with margin ranking loss and Adam. `split.train`
/// must be inverse-augmented. Validation ranks tails of `split.valid` with the
/// filter set train + valid after every epoch; the returned checkpoint is the
/// one with the best validation MRR (the last epoch without validation).
TrainResult train(const Split& split, const ModelConfig& model, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

/// Same loop with the plain translational score ||h + r - t||.
TrainResult pretrain_transe(const Split& split, const ModelConfig& model, const TrainConfig& config,
                            const TrainCallbacks& callbacks = {});

inline constexpr const char* kTrainLogHeader = "epoch,mean_loss,valid_mrr,seconds";
std::string format_log_line(const EpochRecord& record);

}  // namespace xkgat
