#include <doctest.h>

#include "fixtures.hpp"
#include "xkgat/optimizer.hpp"

using namespace xkgat;

namespace {

Matrix<double> rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix<double> m(static_cast<Index>(values.size()), static_cast<Index>(values.begin()->size()));
  Index i = 0;
  for (const auto& row : values) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

SparseMatrix<double> sparse(Index n, std::initializer_list<std::pair<Index, Index>> edges) {
  std::vector<Eigen::Triplet<double>> entries;
  for (auto [i, j] : edges) entries.emplace_back(i, j, 1.0);
  SparseMatrix<double> a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  return a;
}

double loss_of(const std::vector<TrainingPair>& batch, const Parameters<double>& p,
               const RelationTying& tying, const ModelConfig& config, double gamma) {
  double total = 0;
  for (const auto& pair : batch) {
    total += margin_loss(forward(pair.positive, p, tying, config).score,
                         forward(pair.negative, p, tying, config).score, gamma);
  }
  return total;
}

}  // namespace

TEST_CASE("basic layer on a two-row example") {
  const auto heads = rows({{1, 0}, {0, 1}});
  const auto relations = rows({{0, 1}, {1, 0}});
  const auto tails = rows({{0, 1}, {2, 0}});
  auto layer = basic_layer<double>(sparse(2, {{1, 0}}), heads, relations, tails);
  CHECK(layer.output.row(1) == RowVector<double>::Constant(2, 1.0));
  CHECK(layer.output(0, 0) == 1.0);
  CHECK(layer.output(0, 1) == 0.0);
  CHECK(layer.fallback == std::vector<bool>{true, false});
  CHECK(layer.attention.coeff(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("softmax weights follow the logits") {
  const auto heads = rows({{1, 0}, {0, 0}, {0, 0}});
  const auto relations = rows({{0, 0}, {0, 0}, {0, 0}});
  const auto tails = rows({{0, 0}, {2, 0}, {1, 0}});
  // row 2 attends to rows 0 and 1; logits are (1,0).(1,0) = 1 and (1,0).(0,0) = 0
  auto layer = basic_layer<double>(sparse(3, {{2, 0}, {2, 1}}), heads, relations, tails);
  const double e = std::exp(1.0);
  CHECK(layer.attention.coeff(2, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-12));
  CHECK(layer.attention.coeff(2, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-12));
}

TEST_CASE("layer rejects bad shapes and non-finite input") {
  const auto m = rows({{1, 0}, {0, 1}});
  CHECK_THROWS_AS(basic_layer<double>(sparse(3, {}), m, m, m), DataError);
  auto bad = m;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(basic_layer<double>(sparse(2, {}), bad, m, m), NumericError);
}

TEST_CASE("score in both norms") {
  RowVector<double> h(2), r(2), t(2);
  h << 1, 2;
  r << 0, 1;
  t << 1, 0;
  CHECK(score(h, r, t, Norm::l1) == 3.0);
  CHECK(score(h, r, t, Norm::l2) == doctest::Approx(3.0));
  t << 0, 0;
  CHECK(score(h, r, t, Norm::l1) == 4.0);
  CHECK(score(h, r, t, Norm::l2) == doctest::Approx(std::sqrt(10.0)));
}

TEST_CASE("margin loss") {
  CHECK(margin_loss(1.0, 4.0, 2.0) == 0.0);
  CHECK(margin_loss(3.0, 4.0, 2.0) == 1.0);
  CHECK(margin_loss(2.0, 4.0, 2.0) == 0.0);
}

TEST_CASE("attention rows sum to one on random subgraphs") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 50; ++round) {
    auto g = fixtures::random_subgraph(rng, 8, 4, 3);
    auto p = fixtures::random_params(rng, 4, 3, 5);
    auto tying = fixtures::paired_tying(3);
    ModelConfig config;
    config.layers = 2;
    auto trace = forward(g, p, tying, config);
    for (const auto& c : trace.attention) {
      for (Index i = 0; i < c.rows(); ++i) {
        if (trace.fallback[static_cast<std::size_t>(i)]) continue;
        CHECK(std::abs(c.row(i).sum() - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("gradients match central finite differences") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    const int n_rel = 2;
    const int n_ent = 5;
    ModelConfig config;
    config.dim = 4;
    config.layers = 1 + round % 2;
    config.norm = round % 4 < 2 ? Norm::l1 : Norm::l2;
    auto tying = fixtures::paired_tying(n_rel);
    auto p = fixtures::random_params(rng, n_ent, n_rel, config.dim);
    std::vector<TrainingPair> batch{{fixtures::random_subgraph(rng, 6, n_ent, 2 * n_rel),
                                     fixtures::random_subgraph(rng, 6, n_ent, 2 * n_rel)}};
    const double gamma = 10.0;  // keeps the hinge active
    auto grads = gradients(batch, p, tying, config, gamma);
    CHECK(grads.loss == doctest::Approx(loss_of(batch, p, tying, config, gamma)));

    const double h = 1e-6;
    auto check_table = [&](Matrix<double> Parameters<double>::*table, const Matrix<double>& analytic) {
      for (Index k = 0; k < (p.*table).size(); ++k) {
        auto plus = p, minus = p;
        (plus.*table).data()[k] += h;
        (minus.*table).data()[k] -= h;
        const double fd = (loss_of(batch, plus, tying, config, gamma) -
                           loss_of(batch, minus, tying, config, gamma)) /
                          (2 * h);
        const double a = analytic.data()[k];
        CHECK(std::abs(fd - a) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    };
    check_table(&Parameters<double>::entities, grads.entities);
    check_table(&Parameters<double>::relations, grads.relations);
  }
}

TEST_CASE("a target without neighbors scores like TransE") {
  std::mt19937_64 rng(5);
  auto tying = fixtures::paired_tying(3);
  for (int round = 0; round < 100; ++round) {
    auto p = fixtures::random_params(rng, 6, 3, 7, 2.0);
    std::uniform_int_distribution<EntityId> ent(0, 5);
    std::uniform_int_distribution<RelationId> rel(0, 5);
    const Triple t{ent(rng), rel(rng), ent(rng)};
    auto g = make_subgraph({t}, {0});
    ModelConfig config;
    config.layers = 1 + round % 3;
    config.max_depth = 3;
    config.norm = round % 2 ? Norm::l1 : Norm::l2;
    CHECK(std::abs(forward(g, p, tying, config).score - transe_score(t, p, tying, config.norm)) < 1e-12);
  }
}

TEST_CASE("inverse relations read the negated canonical row") {
  auto store = fixtures::make_store({{"a", "r", "b"}, {"b", "s", "c"}}, true);
  auto tying = RelationTying::from(store.vocab());
  std::mt19937_64 rng(1);
  auto p = fixtures::random_params(rng, 3, 2, 4);
  const auto r = store.vocab().relation_id("r");
  const auto r_inv = store.vocab().relation_id("r~inv");
  CHECK(p.relation(tying, r_inv) == -p.relation(tying, r));
  CHECK(tying.row[r_inv] == tying.row[r]);
}

TEST_CASE("uniform init stays inside its bound") {
  auto p = init_params(50, 4, 36, 9);
  CHECK(p.entities.rows() == 50);
  CHECK(p.relations.rows() == 4);
  CHECK(p.entities.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(p.relations.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(p.entities.cwiseAbs().maxCoeff() > 0.9);
  CHECK(std::abs(p.entities.mean()) < 0.05);
  auto q = init_params(50, 4, 36, 9);
  CHECK(p.entities == q.entities);
  CHECK_THROWS_AS(init_params(0, 4, 36, 9), DataError);
}

TEST_CASE("negative sampling with two entities swaps in the other one") {
  std::mt19937_64 rng(2);
  const Triple t{0, 0, 1};
  int heads = 0;
  for (int i = 0; i < 200; ++i) {
    auto s = sample_negative(t, 2, rng);
    if (s.side == CorruptedSide::head) {
      ++heads;
      CHECK(s.corrupted == Triple{1, 0, 1});
    } else {
      CHECK(s.corrupted == Triple{0, 0, 0});
    }
  }
  CHECK(heads > 50);
  CHECK(heads < 150);
  CHECK_THROWS_AS(sample_negative(t, 1, rng), DataError);
}

TEST_CASE("filtered negatives avoid stored triples when possible") {
  auto store = fixtures::make_store({{"a", "r", "b"}, {"a", "r", "c"}, {"c", "r", "b"}});
  std::mt19937_64 rng(8);
  const auto t = fixtures::triple(store, "a", "r", "b");
  for (int i = 0; i < 100; ++i) CHECK_FALSE(store.contains(sample_negative(t, 3, rng, &store).corrupted));
}

TEST_CASE("first Adam step moves every coordinate by the learning rate") {
  Parameters<double> p{Matrix<double>::Zero(2, 3), Matrix<double>::Zero(1, 3)};
  auto grads = Gradients<double>::zeros_like(p);
  grads.entities << 1, -2, 0.5, 3, -0.1, 7;
  grads.relations << -4, 2, 1;
  auto state = AdamState::zeros_like(p);
  AdamConfig config;
  config.learning_rate = 0.01;
  config.epsilon = 0;
  adam_step(p, grads, state, config);
  CHECK(state.step == 1);
  for (Index i = 0; i < p.entities.size(); ++i) {
    CHECK(p.entities.data()[i] == doctest::Approx(-0.01 * (grads.entities.data()[i] > 0 ? 1 : -1)));
  }
  for (Index i = 0; i < p.relations.size(); ++i) {
    CHECK(p.relations.data()[i] == doctest::Approx(-0.01 * (grads.relations.data()[i] > 0 ? 1 : -1)));
  }
}

TEST_CASE("model config validation") {
  ModelConfig config;
  CHECK_NOTHROW(config.validate());
  config.omega = {0.5, 0.5};
  CHECK_NOTHROW(config.validate());
  config.omega = {0.7, 0.7};
  CHECK_THROWS_AS(config.validate(), DataError);
  config.omega = {1.0};
  CHECK_THROWS_AS(config.validate(), DataError);
  config.omega.clear();
  config.max_depth = 1;
  CHECK_THROWS_AS(config.validate(), DataError);
  CHECK(ModelConfig{}.layer_weights() == std::vector<double>{0.5, 0.5});
}
