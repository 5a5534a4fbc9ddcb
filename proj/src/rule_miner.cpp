#include "xkgat/rule_miner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "xkgat/parallel.hpp"

namespace xkgat {

namespace {

Atom canonical_atom(Term subject, RelationId relation, Term object, const Vocabulary& vocab) {
  const auto& info = vocab.relation(relation);
  if (info.is_inverse) return {object, info.canonical, subject};
  return {subject, relation, object};
}

// Binds variables of `atom` to the entities of `ground`; false on a clash.
bool bind_atom(const Atom& atom, const Triple& ground, Binding& binding) {
  if (atom.relation != ground.relation) return false;
  for (auto [term, value] : {std::pair{atom.subject, ground.head}, std::pair{atom.object, ground.tail}}) {
    if (!term.is_variable()) {
      if (term.id != value) return false;
      continue;
    }
    if (binding[term.id] == kUnbound) {
      binding[term.id] = value;
    } else if (binding[term.id] != value) {
      return false;
    }
  }
  return true;
}

std::uint32_t max_variable(std::span<const Atom> atoms) {
  std::uint32_t n = 0;
  for (const auto& a : atoms) {
    if (a.subject.is_variable()) n = std::max(n, a.subject.id);
    if (a.object.is_variable()) n = std::max(n, a.object.id);
  }
  return n;
}

class Solver {
 public:
  Solver(const TripleStore& store, std::span<const Atom> atoms,
         const std::function<bool(const Binding&)>& visit)
      : store_(store), atoms_(atoms), visit_(visit), done_(atoms.size(), false) {}

  bool run(Binding& binding) { return step(binding, atoms_.size()); }

 private:
  EntityId value(const Term& t, const Binding& b) const {
    return t.is_variable() ? b[t.id] : static_cast<EntityId>(t.id);
  }

  bool step(Binding& b, std::size_t remaining) {
    if (remaining == 0) return visit_(b);
    std::size_t pick = 0;
    int best = -1;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (done_[i]) continue;
      const int bound = (value(atoms_[i].subject, b) != kUnbound) + (value(atoms_[i].object, b) != kUnbound);
      if (bound > best) {
        best = bound;
        pick = i;
      }
    }
    const Atom& atom = atoms_[pick];
    done_[pick] = true;
    const EntityId s = value(atom.subject, b);
    const EntityId o = value(atom.object, b);
    bool keep_going = true;
    if (s != kUnbound && o != kUnbound) {
      if (store_.contains({s, atom.relation, o})) keep_going = step(b, remaining - 1);
    } else if (s != kUnbound) {
      for (EntityId t : store_.tails(s, atom.relation)) {
        if (!(keep_going = extend(b, atom, s, t, remaining))) break;
      }
    } else if (o != kUnbound) {
      for (EntityId h : store_.heads(atom.relation, o)) {
        if (!(keep_going = extend(b, atom, h, o, remaining))) break;
      }
    } else {
      for (auto pos : store_.by_relation(atom.relation)) {
        const auto& t = store_.triples()[pos];
        if (!(keep_going = extend(b, atom, t.head, t.tail, remaining))) break;
      }
    }
    done_[pick] = false;
    return keep_going;
  }

  bool extend(Binding& b, const Atom& atom, EntityId s, EntityId o, std::size_t remaining) {
    std::uint32_t bound[2];
    int n_bound = 0;
    bool consistent = true;
    for (auto [term, v] : {std::pair{atom.subject, s}, std::pair{atom.object, o}}) {
      if (!term.is_variable()) continue;
      if (b[term.id] == kUnbound) {
        b[term.id] = v;
        bound[n_bound++] = term.id;
      } else if (b[term.id] != v) {
        consistent = false;
      }
    }
    const bool keep_going = consistent ? step(b, remaining - 1) : true;
    for (int i = 0; i < n_bound; ++i) b[bound[i]] = kUnbound;
    return keep_going;
  }

  const TripleStore& store_;
  std::span<const Atom> atoms_;
  const std::function<bool(const Binding&)>& visit_;
  std::vector<bool> done_;
};

std::vector<Atom> all_atoms(const Rule& rule) {
  std::vector<Atom> atoms{rule.head};
  atoms.insert(atoms.end(), rule.body.begin(), rule.body.end());
  return atoms;
}

}  // namespace

GeneralizedExplanation generalize(const Explanation& explanation, const Vocabulary& vocab,
                                  bool open_endpoint) {
  if (!explanation.chain_valid()) throw DataError("explanation is not a valid chain");
  const auto& path = explanation.path;
  const std::size_t l = path.size();
  const bool shared_endpoint = open_endpoint || explanation.closed();

  // Chain positions: 0 is h1, l is the target head.
  auto term_at = [&](std::size_t position) {
    if (position == l) return Term::variable(1);
    if (position == 0) {
      return shared_endpoint ? Term::variable(2) : Term::constant(path.front().head);
    }
    return Term::variable(static_cast<std::uint32_t>(2 + position));
  };
  const Term head_object =
      shared_endpoint ? Term::variable(2) : Term::constant(explanation.target.tail);

  Rule rule;
  rule.head = canonical_atom(Term::variable(1), explanation.target.relation, head_object, vocab);
  for (std::size_t i = 0; i < l; ++i) {
    rule.body.push_back(canonical_atom(term_at(i), path[i].relation, term_at(i + 1), vocab));
  }
  GeneralizedExplanation out;
  out.rule = normalize(std::move(rule));

  out.binding.assign(out.rule.variable_count() + 1, kUnbound);
  bool ok = bind_atom(out.rule.head, canonicalize(explanation.target, vocab), out.binding);
  for (std::size_t i = 0; ok && i < l; ++i) {
    ok = bind_atom(out.rule.body[i], canonicalize(path[i], vocab), out.binding);
  }
  if (!ok) out.binding.clear();
  return out;
}

Rule explanation_to_rule(const Explanation& explanation, const Vocabulary& vocab, bool open_endpoint) {
  return generalize(explanation, vocab, open_endpoint).rule;
}

std::map<Rule, std::size_t> aggregate_rules(std::span<const Explanation> explanations,
                                            const Vocabulary& vocab, bool open_endpoint) {
  std::map<Rule, std::size_t> counts;
  for (const auto& e : explanations) ++counts[explanation_to_rule(e, vocab, open_endpoint)];
  return counts;
}

bool for_each_grounding(const TripleStore& store, std::span<const Atom> atoms, Binding& binding,
                        const std::function<bool(const Binding&)>& visit) {
  const auto needed = static_cast<std::size_t>(max_variable(atoms)) + 1;
  if (binding.size() < needed) binding.resize(needed, kUnbound);
  Solver solver(store, atoms, visit);
  return solver.run(binding);
}

std::size_t count_groundings(const Rule& rule, const TripleStore& store) {
  const auto atoms = all_atoms(rule);
  Binding binding;
  std::size_t count = 0;
  for_each_grounding(store, atoms, binding, [&](const Binding&) {
    ++count;
    return true;
  });
  return count;
}

HeadCoverage head_coverage(const Rule& rule, const TripleStore& store) {
  HeadCoverage out;
  Binding binding(rule.variable_count() + 1, kUnbound);
  const std::function<bool(const Binding&)> found = [](const Binding&) { return false; };
  for_each_grounding(store, std::span<const Atom>(&rule.head, 1), binding, [&](const Binding& b) {
    ++out.head_size;
    Binding extended = b;
    if (!for_each_grounding(store, rule.body, extended, found)) ++out.support;
    return true;
  });
  out.hc = out.head_size == 0 ? 0.0
                              : static_cast<double>(out.support) / static_cast<double>(out.head_size);
  return out;
}

std::vector<Triple> apply_rules(std::span<const Rule> rules, const TripleStore& store) {
  std::set<Triple> inferred;
  for (const auto& rule : rules) {
    std::set<std::uint32_t> body_vars;
    for (const auto& a : rule.body) {
      if (a.subject.is_variable()) body_vars.insert(a.subject.id);
      if (a.object.is_variable()) body_vars.insert(a.object.id);
    }
    for (const Term& t : {rule.head.subject, rule.head.object}) {
      if (t.is_variable() && !body_vars.contains(t.id)) {
        throw DataError("head variable ?V" + std::to_string(t.id) + " does not occur in the body");
      }
    }
    if (rule.body.empty()) throw DataError("rule has an empty body");
    Binding binding(rule.variable_count() + 1, kUnbound);
    for_each_grounding(store, rule.body, binding, [&](const Binding& b) {
      const auto value = [&](const Term& t) { return t.is_variable() ? b[t.id] : t.id; };
      const Triple head{value(rule.head.subject), rule.head.relation, value(rule.head.object)};
      if (!store.contains(head)) inferred.insert(head);
      return true;
    });
  }
  return {inferred.begin(), inferred.end()};
}

std::vector<ScoredRule> score_rules(const std::map<Rule, std::size_t>& counts,
                                    const TripleStore& store, unsigned workers) {
  std::vector<ScoredRule> out;
  out.reserve(counts.size());
  for (const auto& [rule, count] : counts) out.push_back({rule, {count}});
  parallel_for(out.size(), workers, [&](std::size_t i) {
    auto& scored = out[i];
    const auto coverage = head_coverage(scored.rule, store);
    scored.stats.hc = coverage.hc;
    scored.stats.support = coverage.support;
    scored.stats.head_size = coverage.head_size;
    scored.stats.inferred = apply_rules(std::span<const Rule>(&scored.rule, 1), store).size();
  });
  std::stable_sort(out.begin(), out.end(), [](const ScoredRule& a, const ScoredRule& b) {
    return a.stats.generation_count > b.stats.generation_count;
  });
  return out;
}

FilteredRules filter_rules(std::span<const ScoredRule> rules, const RuleThresholds& thresholds) {
  FilteredRules out;
  for (const auto& r : rules) {
    if (r.stats.generation_count < thresholds.theta) continue;
    out.quality.push_back(r);
    if (r.stats.hc > thresholds.hc_min && r.stats.support >= thresholds.support_min) {
      out.high_quality.push_back(r);
    }
  }
  return out;
}

void write_rules(std::ostream& out, std::span<const ScoredRule> rules, const Vocabulary& vocab) {
  out << kRulesHeader << '\n';
  char hc[32];
  for (const auto& r : rules) {
    std::snprintf(hc, sizeof hc, "%.6f", r.stats.hc);
    out << format_rule(r.rule, vocab) << '\t' << r.stats.generation_count << '\t' << hc << '\t'
        << r.stats.support << '\t' << r.stats.inferred << '\n';
  }
}

void write_rules(const std::filesystem::path& path, std::span<const ScoredRule> rules,
                 const Vocabulary& vocab) {
  std::ostringstream out;
  write_rules(out, rules, vocab);
  write_file_atomic(path, out.str());
}

std::vector<ScoredRule> read_rules(const std::filesystem::path& path, const Vocabulary& vocab) {
  const auto lines = read_lines(path);
  std::vector<ScoredRule> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty() || (i == 0 && line == kRulesHeader)) continue;
    std::vector<std::string> fields;
    std::istringstream in(line);
    for (std::string f; std::getline(in, f, '\t');) fields.push_back(f);
    if (fields.size() != 5) throw ParseError(path.string(), i + 1, "expected 5 tab-separated fields");
    ScoredRule r;
    try {
      r.rule = parse_rule(fields[0], vocab);
      r.stats.generation_count = std::stoull(fields[1]);
      r.stats.hc = std::stod(fields[2]);
      r.stats.support = std::stoull(fields[3]);
      r.stats.inferred = std::stoull(fields[4]);
    } catch (const std::logic_error& e) {
      throw ParseError(path.string(), i + 1, e.what());
    } catch (const DataError& e) {
      throw ParseError(path.string(), i + 1, e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace xkgat
