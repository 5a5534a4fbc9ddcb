#include <doctest.h>

#include <map>

#include "fixtures.hpp"
#include "xkgat/explainer.hpp"
#include "xkgat/rule_miner.hpp"

using namespace xkgat;
using fixtures::make_store;
using fixtures::triple;

TEST_CASE("chain weights conserve the layer mass") {
  std::mt19937_64 rng(21);
  int full = 0;
  for (int round = 0; round < 300; ++round) {
    auto g = fixtures::random_subgraph(rng, 6, 3, 2);
    auto p = fixtures::random_params(rng, 3, 2, 4, 1.0);
    auto tying = fixtures::paired_tying(1);
    ModelConfig config;
    config.layers = 1 + round % 3;
    config.max_depth = 3;
    config.omega = config.layers == 3 ? std::vector<double>{0.2, 0.3, 0.5} : std::vector<double>{};
    auto trace = forward(g, p, tying, config);
    std::map<std::size_t, double> mass;
    for (const auto& e : enumerate_explanations(g, trace)) {
      CHECK(e.chain_valid());
      CHECK(e.alpha > 0);
      mass[e.length()] += e.alpha;
    }
    const auto omega = config.layer_weights();
    const bool no_fallback =
        std::none_of(trace.fallback.begin(), trace.fallback.end(), [](bool b) { return b; });
    full += no_fallback;
    for (std::size_t l = 1; l <= omega.size(); ++l) {
      CHECK(mass[l] <= omega[l - 1] + 1e-12);
      if (no_fallback) CHECK(std::abs(mass[l] - omega[l - 1]) < 1e-12);
    }
  }
  CHECK(full > 10);
}

TEST_CASE("two-layer chain with equal layer weights") {
  auto store = make_store({{"c", "p", "b"}, {"b", "q", "a"}, {"a", "r", "t"}});
  auto g = make_subgraph({triple(store, "c", "p", "b"), triple(store, "b", "q", "a"),
                          triple(store, "a", "r", "t")},
                         {2, 1, 0});
  std::mt19937_64 rng(1);
  auto p = fixtures::random_params(rng, 4, 3, 3);
  RelationTying tying{{0, 1, 2}, {1, 1, 1}};
  ModelConfig config;
  config.omega = {0.5, 0.5};
  auto trace = forward(g, p, tying, config);
  auto all = enumerate_explanations(g, trace);
  REQUIRE(all.size() == 2);
  auto top = top_k_explanations(all, 2);
  CHECK(top[0].alpha == doctest::Approx(0.5));
  CHECK(top[1].alpha == doctest::Approx(0.5));
  CHECK(top[0].length() == 1);
  CHECK(top[0].path[0] == triple(store, "b", "q", "a"));
  CHECK(top[1].path == std::vector<Triple>{triple(store, "c", "p", "b"), triple(store, "b", "q", "a")});
  CHECK(top_k_explanations(all, 1).size() == 1);
}

TEST_CASE("top-k ordering is total") {
  std::vector<Explanation> c(4);
  c[0].alpha = 0.2;
  c[0].path = {{3, 0, 1}};
  c[1].alpha = 0.4;
  c[1].path = {{1, 0, 1}, {1, 0, 1}};
  c[2].alpha = 0.4;
  c[2].path = {{2, 0, 1}};
  c[3].alpha = 0.4;
  c[3].path = {{1, 0, 1}};
  auto top = top_k_explanations(c, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].path == std::vector<Triple>{{1, 0, 1}});
  CHECK(top[1].path == std::vector<Triple>{{2, 0, 1}});
  CHECK(top[2].length() == 2);
}

TEST_CASE("support counts other groundings of the generalized rule") {
  auto store = make_store({{"a", "r", "t"}, {"c", "p", "a"}, {"a2", "r", "t"}, {"c", "p", "a2"},
                           {"a3", "r", "t"}, {"c2", "p", "a3"}});
  Explanation e;
  e.target = triple(store, "a", "r", "t");
  e.path = {triple(store, "c", "p", "a")};
  CHECK(format_rule(explanation_to_rule(e, store.vocab()), store.vocab()) == "(?V1, r, t) <= (c, p, ?V1)");
  CHECK(count_supports(e, store) == 1);
  e.target = triple(store, "a3", "r", "t");
  e.path = {triple(store, "c2", "p", "a3")};
  CHECK(count_supports(e, store) == 0);
}

TEST_CASE("explain drops chains through the target row") {
  auto store = make_store({{"a", "r", "t"}, {"t", "s", "a"}, {"b", "q", "a"}}, true);
  ModelConfig config;
  config.dim = 4;
  std::mt19937_64 rng(2);
  auto checkpoint = make_checkpoint(ModelKind::attention, fixtures::random_params(rng, 3, 3, 4), config,
                                    store.vocab(), 0);
  const auto target = triple(store, "a", "r", "t");
  auto g = build_subgraph(store, target, config.subgraph_options(SubgraphMode::inference));
  auto trace = forward(g, checkpoint.params, RelationTying::from(store.vocab()), config);
  auto all = enumerate_explanations(g, trace);
  CHECK(std::any_of(all.begin(), all.end(), [&](const auto& e) { return e.self_referential(g.target_row()); }));
  auto top = explain(target, store, checkpoint, 100);
  CHECK_FALSE(top.empty());
  for (const auto& e : top) CHECK_FALSE(e.self_referential(g.target_row()));
  for (const auto& e : top) {
    for (const auto& t : e.path) CHECK(t != target);
  }
}

TEST_CASE("TransE explanations use a single depth-one layer") {
  auto store = make_store({{"c", "p", "b"}, {"b", "q", "a"}, {"d", "q", "a"}, {"a", "r", "t"}}, true);
  std::mt19937_64 rng(3);
  auto params = fixtures::random_params(rng, 5, 3, 4);
  auto top = transe_explanations(triple(store, "a", "r", "t"), params, store, 10);
  REQUIRE(top.size() == 2);
  double total = 0;
  for (const auto& e : top) {
    CHECK(e.length() == 1);
    total += e.alpha;
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("report, recall and the jsonl round trip") {
  const auto split = fixtures::tiny_split(4);
  const auto& vocab = split.train.vocab();
  ModelConfig config;
  config.dim = 6;
  auto params = init_params(vocab.num_entities(), vocab.num_canonical_relations(), config.dim, 2);
  auto checkpoint = make_checkpoint(ModelKind::attention, params, config, vocab, 2);
  auto report = explanation_report(split.test, checkpoint, split.train, 3, 2);
  auto serial = explanation_report(split.test, checkpoint, split.train, 3, 1);
  CHECK(report.n_triples == split.test.size());
  CHECK(report.n_explained == serial.n_explained);
  std::size_t explained = 0;
  for (const auto& d : report.details) {
    CHECK(d.top.size() <= 3);
    CHECK(d.supports.size() == d.top.size());
    explained += std::any_of(d.supports.begin(), d.supports.end(), [](auto s) { return s >= 1; });
  }
  CHECK(report.n_explained == explained);
  CHECK(report.recall == doctest::Approx(double(explained) / double(split.test.size())));
  CHECK(report.n_explained > 0);
  CHECK(report.avg_support.has_value());

  const auto path = fixtures::temp_dir("explain") / "e.jsonl";
  write_explanations_jsonl(path, report.details, vocab);
  auto back = read_explanations_jsonl(path, vocab);
  std::vector<ExplainedTriple> nonempty;
  for (const auto& d : report.details) {
    if (!d.top.empty()) nonempty.push_back(d);
  }
  REQUIRE(back.size() == nonempty.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].target == nonempty[i].target);
    CHECK(back[i].supports == nonempty[i].supports);
    REQUIRE(back[i].top.size() == nonempty[i].top.size());
    for (std::size_t j = 0; j < back[i].top.size(); ++j) {
      CHECK(back[i].top[j].path == nonempty[i].top[j].path);
      CHECK(back[i].top[j].alpha == nonempty[i].top[j].alpha);
    }
  }
  CHECK_THROWS_AS(explanation_report({}, checkpoint, split.train, 3), DataError);
}
