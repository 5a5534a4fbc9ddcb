#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "xkgat/trainer.hpp"

using namespace xkgat;

namespace {

ModelConfig small_model() {
  ModelConfig model;
  model.dim = 8;
  model.layers = 2;
  model.max_depth = 2;
  model.neighbor_cap = 50;
  return model;
}

TrainConfig small_train(unsigned workers) {
  TrainConfig config;
  config.batch_size = 16;
  config.learning_rate = 0.01;
  config.max_epochs = 3;
  config.seed = 42;
  config.workers = workers;
  config.early_stopping = false;
  return config;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("training is deterministic across worker counts") {
  const auto split = fixtures::tiny_split();
  auto one = train(split, small_model(), small_train(1));
  auto three = train(split, small_model(), small_train(3));
  CHECK(one.best.params.entities == three.best.params.entities);
  CHECK(one.best.params.relations == three.best.params.relations);
  REQUIRE(one.history.size() == 3);
  for (std::size_t i = 0; i < one.history.size(); ++i) {
    CHECK(one.history[i].mean_loss == three.history[i].mean_loss);
    CHECK(one.history[i].valid_mrr == three.history[i].valid_mrr);
  }
}

TEST_CASE("training lowers the loss") {
  const auto split = fixtures::tiny_split();
  auto config = small_train(1);
  config.max_epochs = 6;
  std::vector<EpochRecord> seen;
  auto result = train(split, small_model(), config, {[&](const EpochRecord& r) { seen.push_back(r); }});
  REQUIRE(seen.size() == 6);
  CHECK(seen.back().mean_loss < seen.front().mean_loss);
  CHECK(result.best.epoch == 6);
  CHECK(result.best.iteration > 0);
}

TEST_CASE("zero epochs return the initialization") {
  const auto split = fixtures::tiny_split();
  auto config = small_train(1);
  config.max_epochs = 0;
  auto result = train(split, small_model(), config);
  CHECK(result.history.empty());
  CHECK(std::isnan(result.best_valid_mrr));
  const auto& vocab = split.train.vocab();
  auto init = init_params(vocab.num_entities(), vocab.num_canonical_relations(), 8, mix_seed(42, 1));
  CHECK(result.best.params.entities == init.entities);
}

TEST_CASE("invalid training setups are data errors") {
  auto split = fixtures::tiny_split();
  auto config = small_train(1);
  config.early_stopping = true;
  split.valid.clear();
  CHECK_THROWS_AS(train(split, small_model(), config), DataError);

  auto plain = fixtures::tiny_split();
  auto raw = split_dataset(generate_synthetic(fixtures::tiny_synthetic()).store, plain.target_relations, {});
  CHECK_THROWS_AS(train(raw, small_model(), small_train(1)), DataError);

  auto bad = small_train(1);
  bad.learning_rate = 0;
  CHECK_THROWS_AS(train(plain, small_model(), bad), DataError);
  bad = small_train(1);
  bad.init = InitMode::checkpoint;
  CHECK_THROWS_AS(train(plain, small_model(), bad), DataError);
}

TEST_CASE("early stopping halts after the patience runs out") {
  const auto split = fixtures::tiny_split();
  auto config = small_train(1);
  config.max_epochs = 30;
  config.early_stopping = true;
  config.patience = 1;
  config.learning_rate = 0.2;
  auto result = train(split, small_model(), config);
  CHECK(result.history.size() <= 30);
  for (const auto& r : result.history) CHECK(r.valid_mrr <= result.best_valid_mrr);
  if (result.history.size() < 30) {
    CHECK(result.history.back().valid_mrr <= result.best_valid_mrr);
    CHECK(result.best_epoch < static_cast<int>(result.history.size()));
  }
}

TEST_CASE("checkpoints round-trip byte for byte") {
  const auto split = fixtures::tiny_split();
  auto result = train(split, small_model(), small_train(1));
  const auto dir = fixtures::temp_dir("ckpt");
  save_checkpoint(result.best, dir / "a");
  auto loaded = load_checkpoint(dir / "a");
  CHECK(loaded.params.entities == result.best.params.entities);
  CHECK(loaded.params.relations == result.best.params.relations);
  CHECK(loaded.kind == ModelKind::attention);
  CHECK(loaded.model.dim == 8);
  CHECK(loaded.epoch == result.best.epoch);
  save_checkpoint(loaded, dir / "b");
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    CHECK(slurp(entry.path()) == slurp(dir / "b" / entry.path().filename()));
  }
  CHECK_NOTHROW(check_compatible(loaded, split.train.vocab()));
  CHECK_THROWS_AS(check_dimension(loaded, 9), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), DataError);
}

TEST_CASE("warm start from a TransE checkpoint") {
  const auto split = fixtures::tiny_split();
  auto pre = pretrain_transe(split, small_model(), small_train(1));
  CHECK(pre.best.kind == ModelKind::transe);
  const auto dir = fixtures::temp_dir("warm");
  save_checkpoint(pre.best, dir / "pre");
  auto config = small_train(1);
  config.init = InitMode::checkpoint;
  config.init_checkpoint = dir / "pre";
  config.max_epochs = 1;
  auto result = train(split, small_model(), config);
  CHECK(result.history.size() == 1);
  auto other = small_model();
  other.dim = 4;
  CHECK_THROWS_AS(train(split, other, config), DataError);
}

TEST_CASE("log lines") {
  CHECK(format_log_line({3, 0.5, 0.25, 1.5}) == "3,0.500000,0.250000,1.500");
}
