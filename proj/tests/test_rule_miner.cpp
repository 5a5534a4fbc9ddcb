#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "xkgat/explainer.hpp"
#include "xkgat/rule_miner.hpp"

using namespace xkgat;
using fixtures::make_store;
using fixtures::triple;

namespace {

Explanation chain(const TripleStore& store, Triple target, std::vector<Triple> path) {
  Explanation e;
  e.target = target;
  e.path = std::move(path);
  return e;
}

Rule random_rule(std::mt19937_64& rng, std::size_t n_entities, std::size_t n_relations) {
  std::uniform_int_distribution<int> body_len(1, 2);
  std::uniform_int_distribution<std::uint32_t> var(1, 3);
  std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(n_entities - 1));
  std::uniform_int_distribution<RelationId> rel(0, static_cast<RelationId>(n_relations - 1));
  std::bernoulli_distribution constant(0.25);
  auto term = [&]() { return constant(rng) ? Term::constant(ent(rng)) : Term::variable(var(rng)); };
  Rule rule;
  rule.head = {Term::variable(1), rel(rng), term()};
  const int n = body_len(rng);
  for (int i = 0; i < n; ++i) rule.body.push_back({term(), rel(rng), term()});
  return normalize(rule);
}

bool head_vars_in_body(const Rule& rule) {
  for (const Term& t : {rule.head.subject, rule.head.object}) {
    if (!t.is_variable()) continue;
    bool found = false;
    for (const auto& a : rule.body) found = found || a.subject == t || a.object == t;
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("open explanations become association rules") {
  auto store = make_store({{"Item1", "SleeveStyle", "Normal"}, {"Item1", "suitableFor", "MiddleAge"}}, true);
  const auto& v = store.vocab();
  auto e = chain(store, triple(store, "Item1", "suitableFor", "MiddleAge"),
                 {triple(store, "Normal", "SleeveStyle~inv", "Item1")});
  CHECK(format_rule(explanation_to_rule(e, v), v) == "(?V1, suitableFor, MiddleAge) <= (?V1, SleeveStyle, Normal)");
  auto g = generalize(e, v);
  REQUIRE(g.binding.size() == 2);
  CHECK(g.binding[1] == v.entity_id("Item1"));
}

TEST_CASE("closed explanations become path rules") {
  auto store = make_store({{"Item3", "titleInclude", "Tianzi"}, {"Item3", "brandIs", "Tianzi"}}, true);
  const auto& v = store.vocab();
  auto e = chain(store, triple(store, "Item3", "brandIs", "Tianzi"),
                 {triple(store, "Tianzi", "titleInclude~inv", "Item3")});
  auto rule = explanation_to_rule(e, v);
  CHECK(format_rule(rule, v) == "(?V1, brandIs, ?V2) <= (?V1, titleInclude, ?V2)");
  CHECK(rule.kind() == RuleKind::path);
  CHECK(is_connected(rule));
  auto open = explanation_to_rule(chain(store, triple(store, "Item3", "brandIs", "Tianzi"),
                                        {triple(store, "Tianzi", "titleInclude~inv", "Item3")}),
                                  v, true);
  CHECK(open == rule);
}

TEST_CASE("longer chains keep interior variables") {
  auto store = make_store({{"c", "p", "b"}, {"b", "q", "a"}, {"a", "r", "t"}});
  const auto& v = store.vocab();
  auto e = chain(store, triple(store, "a", "r", "t"), {triple(store, "c", "p", "b"), triple(store, "b", "q", "a")});
  CHECK(format_rule(explanation_to_rule(e, v), v) == "(?V1, r, t) <= (c, p, ?V2) & (?V2, q, ?V1)");
  CHECK(format_rule(explanation_to_rule(e, v, true), v) == "(?V1, r, ?V2) <= (?V2, p, ?V3) & (?V3, q, ?V1)");
  auto broken = chain(store, triple(store, "a", "r", "t"), {triple(store, "c", "p", "b")});
  CHECK_THROWS_AS(generalize(broken, v), DataError);
}

TEST_CASE("head coverage of a three-in-four rule") {
  auto store = make_store({{"x1", "h", "c"}, {"x2", "h", "c"}, {"x3", "h", "c"}, {"x4", "h", "c"},
                           {"x1", "b", "d"}, {"x2", "b", "d"}, {"x3", "b", "d"}, {"x5", "b", "d"}});
  const auto rule = parse_rule("(?V1, h, c) <= (?V1, b, d)", store.vocab());
  auto hc = head_coverage(rule, store);
  CHECK(hc.head_size == 4);
  CHECK(hc.support == 3);
  CHECK(hc.hc == 0.75);
  CHECK(count_groundings(rule, store) == 3);
  auto inferred = apply_rules(std::span<const Rule>(&rule, 1), store);
  REQUIRE(inferred.size() == 1);
  CHECK(inferred[0] == Triple{store.vocab().entity_id("x5"), store.vocab().relation_id("h"),
                              store.vocab().entity_id("c")});
}

TEST_CASE("join engine agrees with brute force") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 60; ++round) {
    auto store = fixtures::random_store(rng, 7, 3, 25, false);
    fixtures::Oracle oracle(store);
    for (int k = 0; k < 10; ++k) {
      const auto rule = random_rule(rng, 7, 3);
      CHECK(count_groundings(rule, store) == oracle.count_groundings(rule));
      auto hc = head_coverage(rule, store);
      auto [support, head_size] = oracle.head_coverage(rule);
      CHECK(hc.support == support);
      CHECK(hc.head_size == head_size);
      if (head_vars_in_body(rule)) {
        auto got = apply_rules(std::span<const Rule>(&rule, 1), store);
        auto want = oracle.apply({rule});
        CHECK(std::vector<Triple>(want.begin(), want.end()) == got);
      } else {
        CHECK_THROWS_AS(apply_rules(std::span<const Rule>(&rule, 1), store), DataError);
      }
    }
  }
}

TEST_CASE("statistics do not depend on variable names") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 40; ++round) {
    auto store = fixtures::random_store(rng, 8, 3, 30, false);
    const auto rule = random_rule(rng, 8, 3);
    Rule renamed = rule;
    const std::uint32_t n = rule.variable_count();
    auto rename = [&](Term& t) {
      if (t.is_variable()) t.id = n + 1 - t.id;
    };
    rename(renamed.head.subject);
    rename(renamed.head.object);
    for (auto& a : renamed.body) {
      rename(a.subject);
      rename(a.object);
    }
    CHECK(normalize(renamed) == rule);
    CHECK(count_groundings(renamed, store) == count_groundings(rule, store));
    CHECK(head_coverage(renamed, store).support == head_coverage(rule, store).support);
  }
}

TEST_CASE("stricter thresholds keep subsets") {
  std::vector<ScoredRule> rules;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    ScoredRule r;
    r.rule.head = {Term::variable(1), static_cast<RelationId>(i), Term::constant(0)};
    r.stats.generation_count = rng() % 10;
    r.stats.hc = double(rng() % 100) / 100;
    r.stats.support = rng() % 40;
    rules.push_back(r);
  }
  auto loose = filter_rules(rules, {2, 0.3, 5});
  auto strict = filter_rules(rules, {5, 0.7, 20});
  CHECK(strict.quality.size() <= loose.quality.size());
  CHECK(strict.high_quality.size() <= loose.high_quality.size());
  for (const auto& r : strict.high_quality) {
    CHECK(r.stats.generation_count >= 5);
    CHECK(r.stats.hc > 0.7);
    CHECK(r.stats.support >= 20);
    CHECK(std::any_of(loose.high_quality.begin(), loose.high_quality.end(),
                      [&](const ScoredRule& o) { return o.rule == r.rule; }));
  }
  for (const auto& r : strict.high_quality) {
    CHECK(std::any_of(strict.quality.begin(), strict.quality.end(),
                      [&](const ScoredRule& o) { return o.rule == r.rule; }));
  }
}

TEST_CASE("aggregation, scoring and the rules file") {
  auto store = make_store({{"x1", "h", "c"}, {"x2", "h", "c"}, {"x1", "b", "d"}, {"x2", "b", "d"},
                           {"x3", "b", "d"}},
                          true);
  const auto& v = store.vocab();
  std::vector<Explanation> explanations;
  for (const char* x : {"x1", "x2"}) {
    explanations.push_back(chain(store, triple(store, x, "h", "c"), {triple(store, "d", "b~inv", x)}));
  }
  auto counts = aggregate_rules(explanations, v);
  REQUIRE(counts.size() == 1);
  CHECK(counts.begin()->second == 2);
  auto scored = score_rules(counts, store, 2);
  REQUIRE(scored.size() == 1);
  CHECK(scored[0].stats.hc == 1.0);
  CHECK(scored[0].stats.support == 2);
  CHECK(scored[0].stats.inferred == 1);

  const auto path = fixtures::temp_dir("rules") / "rules.tsv";
  write_rules(path, scored, v);
  auto back = read_rules(path, v);
  REQUIRE(back.size() == 1);
  CHECK(back[0].rule == scored[0].rule);
  CHECK(back[0].stats.generation_count == 2);
  CHECK(back[0].stats.support == 2);
  CHECK(back[0].stats.inferred == 1);
  std::ofstream(path) << kRulesHeader << "\nnot a rule\t1\t0.5\t1\t0\n";
  CHECK_THROWS_AS(read_rules(path, v), ParseError);
}

TEST_CASE("rule text round-trips") {
  auto store = make_store({{"a", "r", "b"}, {"b", "s", "c"}});
  const auto& v = store.vocab();
  for (const char* text : {"(?V1, r, b) <= (?V1, s, c)", "(?V1, r, ?V2) <= (?V1, s, ?V3) & (?V3, r, ?V2)"}) {
    CHECK(format_rule(parse_rule(text, v), v) == text);
  }
  CHECK_THROWS_AS(parse_rule("(?V1, r, b)", v), DataError);
  CHECK_THROWS_AS(parse_rule("(?V1, r, b) <= (?V0, s, c)", v), DataError);
  CHECK_THROWS_AS(parse_rule("(?V1, zz, b) <= (?V1, s, c)", v), DataError);
}
