#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "xkgat/explanation.hpp"
#include "xkgat/kg_store.hpp"
#include "xkgat/rule.hpp"

namespace xkgat {

/// Variable assignment indexed by variable id (slot 0 unused).
using Binding = std::vector<EntityId>;
inline constexpr EntityId kUnbound = ~EntityId{0};

/// A rule together with the variable assignment of the explanation it came from.
struct GeneralizedExplanation {
  Rule rule;
  Binding binding;  // empty when the explanation is not a grounding of `rule`
};

/// Lifts an explanation to a rule. Interior chain entities and the target head
/// become variables; the chain start h1 stays a constant unless it equals the
/// target tail, in which case it shares a variable with the head object.
/// `open_endpoint` always uses that shared variable.
GeneralizedExplanation generalize(const Explanation& explanation, const Vocabulary& vocab,
                                  bool open_endpoint = false);
Rule explanation_to_rule(const Explanation& explanation, const Vocabulary& vocab,
                         bool open_endpoint = false);

/// Generation count of every distinct rule.
std::map<Rule, std::size_t> aggregate_rules(std::span<const Explanation> explanations,
                                            const Vocabulary& vocab, bool open_endpoint = false);

/// Calls `visit` for every assignment satisfying all `atoms` that extends
/// `binding`; `visit` returns false to stop. Returns false if stopped.
bool for_each_grounding(const TripleStore& store, std::span<const Atom> atoms, Binding& binding,
                        const std::function<bool(const Binding&)>& visit);

/// Number of variable assignments satisfying head and body.
std::size_t count_groundings(const Rule& rule, const TripleStore& store);

struct HeadCoverage {
  double hc = 0.0;
  std::size_t support = 0;    // head instances with a matching body
  std::size_t head_size = 0;  // head instances
};

HeadCoverage head_coverage(const Rule& rule, const TripleStore& store);

/// Novel head triples implied by the rules, sorted and deduplicated. Every
/// head variable must occur in the body.
std::vector<Triple> apply_rules(std::span<const Rule> rules, const TripleStore& store);

struct RuleStats {
  std::size_t generation_count = 0;
  double hc = 0.0;
  std::size_t support = 0;
  std::size_t head_size = 0;
  std::size_t inferred = 0;
};

struct ScoredRule {
  Rule rule;
  RuleStats stats;
};

struct RuleThresholds {
  std::size_t theta = 5;
  double hc_min = 0.7;
  std::size_t support_min = 20;
};

struct FilteredRules {
  std::vector<ScoredRule> quality;       // generation_count >= theta
  std::vector<ScoredRule> high_quality;  // and hc > hc_min and support >= support_min
};

/// Scores aggregated rules against `store`; output ordered by generation count
/// descending, then rule.
std::vector<ScoredRule> score_rules(const std::map<Rule, std::size_t>& counts,
                                    const TripleStore& store, unsigned workers = 1);

FilteredRules filter_rules(std::span<const ScoredRule> rules, const RuleThresholds& thresholds);

inline constexpr const char* kRulesHeader = "rule\tgeneration_count\thc\tsupport\tinferred";
void write_rules(std::ostream& out, std::span<const ScoredRule> rules, const Vocabulary& vocab);
void write_rules(const std::filesystem::path& path, std::span<const ScoredRule> rules,
                 const Vocabulary& vocab);
std::vector<ScoredRule> read_rules(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace xkgat
