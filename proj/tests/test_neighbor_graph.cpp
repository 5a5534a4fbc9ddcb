#include <doctest.h>

#include "fixtures.hpp"

using namespace xkgat;
using fixtures::make_store;
using fixtures::triple;

TEST_CASE("one_degree_neighbors follows the tail index and skips the target's inverse") {
  auto store = make_store({{"a", "r1", "b"}, {"x", "r2", "a"}});
  auto n = one_degree_neighbors(store, triple(store, "a", "r1", "b"));
  REQUIRE(n.size() == 1);
  CHECK(n[0] == triple(store, "x", "r2", "a"));

  auto single = make_store({{"a", "r1", "b"}}, true);
  CHECK(one_degree_neighbors(single, triple(single, "a", "r1", "b")).empty());

  auto isolated = make_store({{"a", "r1", "b"}, {"c", "r1", "d"}});
  CHECK(one_degree_neighbors(isolated, triple(isolated, "a", "r1", "b")).empty());
}

TEST_CASE("chain subgraph ordering, adjacency and depth bound") {
  auto store = make_store({{"c", "p", "b"}, {"b", "q", "a"}, {"a", "r", "t"}});
  const auto target = triple(store, "a", "r", "t");
  SubgraphOptions options;
  options.max_depth = 2;
  options.mode = SubgraphMode::training;
  auto g = build_subgraph(store, target, options);
  REQUIRE(g.size() == 3);
  CHECK(g.triples[0] == triple(store, "c", "p", "b"));
  CHECK(g.triples[1] == triple(store, "b", "q", "a"));
  CHECK(g.triples[2] == target);
  CHECK(g.depth == std::vector<int>{2, 1, 0});
  Matrix<double> expected = Matrix<double>::Zero(3, 3);
  expected(2, 1) = 1;
  expected(1, 0) = 1;
  CHECK(g.dense_adjacency() == expected);
  CHECK(adjacency_row_degrees(g) == Eigen::Vector3i(0, 1, 1));

  options.max_depth = 1;
  auto shallow = build_subgraph(store, target, options);
  REQUIRE(shallow.size() == 2);
  CHECK(shallow.triples[0] == triple(store, "b", "q", "a"));
}

TEST_CASE("training mode requires a stored target") {
  auto store = make_store({{"a", "r", "b"}, {"b", "r", "c"}});
  SubgraphOptions options;
  options.mode = SubgraphMode::training;
  CHECK_THROWS_AS(build_subgraph(store, triple(store, "a", "r", "c"), options), DataError);
  options.mode = SubgraphMode::inference;
  CHECK_NOTHROW(build_subgraph(store, triple(store, "a", "r", "c"), options));
}

TEST_CASE("adjacency, leakage and size properties on random stores") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 20; ++round) {
    auto store = fixtures::random_store(rng, 12, 3, 50, true);
    const auto& target = store.triples()[rng() % store.size()];
    SubgraphOptions options;
    options.max_depth = 2;
    options.neighbor_cap = 4;
    options.seed = round;
    auto g = build_subgraph(store, target, options);
    const auto inverse = *inverse_of(target, store.vocab());
    const auto n = g.size();
    CHECK(g.triples.back() == target);
    CHECK(n <= 1 + 4 + 16);
    std::set<Triple> unique(g.triples.begin(), g.triples.end());
    CHECK(unique.size() == g.triples.size());
    for (Index i = 0; i + 1 < n; ++i) {
      CHECK(g.triples[i] != target);
      CHECK(g.triples[i] != inverse);
    }
    const auto dense = g.dense_adjacency();
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const bool edge = i != j && g.triples[j].tail == g.triples[i].head;
        CHECK(dense(i, j) == (edge ? 1.0 : 0.0));
      }
    }
    for (Index i = 0; i + 1 < n; ++i) {
      if (g.depth[i] < 2) continue;
      bool linked = false;
      for (Index j = 0; j < n; ++j) linked = linked || (g.depth[j] == g.depth[i] - 1 && dense(j, i) == 1.0);
      CHECK(linked);
    }
    auto again = build_subgraph(store, target, options);
    CHECK(again.triples == g.triples);
  }
}

TEST_CASE("neighbor cap samples deterministically") {
  auto vocab = std::make_shared<Vocabulary>();
  const auto r = vocab->intern_relation("r");
  const auto hub = vocab->intern_entity("hub");
  const auto tail = vocab->intern_entity("tail");
  std::vector<Triple> triples{{hub, r, tail}};
  for (int i = 0; i < 15; ++i) triples.push_back({vocab->intern_entity("n" + std::to_string(i)), r, hub});
  TripleStore store(vocab, triples);
  SubgraphOptions options;
  options.max_depth = 1;
  options.neighbor_cap = 10;
  options.seed = 4;
  auto a = build_subgraph(store, {hub, r, tail}, options);
  auto b = build_subgraph(store, {hub, r, tail}, options);
  CHECK(a.size() == 11);
  CHECK(a.triples == b.triples);
  options.seed = 5;
  auto c = build_subgraph(store, {hub, r, tail}, options);
  CHECK(c.size() == 11);
}
