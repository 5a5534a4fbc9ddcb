#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xkgat/checkpoint.hpp"
#include "xkgat/kg_store.hpp"
#include "xkgat/model.hpp"
#include "xkgat/rule_miner.hpp"
#include "xkgat/synthetic.hpp"
#include "xkgat/trainer.hpp"

namespace xkgat {

enum class ExplainSource { test, train };

/// Every setting of a pipeline run. Defaults follow the reference setup:
/// d = 100, batch 100, margin 2, learning rate 1e-4, at most 5 epochs, depth 2,
/// neighbor cap 1000, top-3 explanations, theta 5, HC > 0.7, support >= 20.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned workers = 1;

  // [data]
  SplitOptions split;
  std::vector<std::string> targets;  // empty: every relation
  bool head_side = false;

  // [model]
  ModelKind kind = ModelKind::attention;
  ModelConfig model;

  // [train]
  TrainConfig train;
  int pretrain_epochs = 0;  // TransE warm start before attention training

  // [explain]
  std::size_t k = 3;
  ExplainSource explain_source = ExplainSource::test;

  // [rules]
  RuleThresholds thresholds;
  bool open_endpoint = false;

  // [infer]
  std::size_t top_n = 1;

  // [synth] and [rule0], [rule1], ...
  SyntheticConfig synth;

  /// Copies `seed` into every component seed.
  void propagate_seed();
  void validate() const;
};

/// Parses an INI document. Unknown sections or keys are errors.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});
/// Defaults with `section.key=value` overrides applied.
RunConfig default_config(const std::vector<std::string>& overrides = {});

/// INI rendering of `config`; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);

}  // namespace xkgat
