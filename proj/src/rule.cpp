#include "xkgat/rule.hpp"

#include <algorithm>
#include <map>

namespace xkgat {

std::uint32_t Rule::variable_count() const {
  std::uint32_t n = 0;
  auto visit = [&](const Term& t) {
    if (t.is_variable()) n = std::max(n, t.id);
  };
  visit(head.subject);
  visit(head.object);
  for (const auto& a : body) {
    visit(a.subject);
    visit(a.object);
  }
  return n;
}

Rule normalize(Rule rule) {
  std::map<std::uint32_t, std::uint32_t> renamed;
  auto visit = [&](Term& t) {
    if (!t.is_variable()) return;
    auto [it, inserted] = renamed.try_emplace(t.id, static_cast<std::uint32_t>(renamed.size() + 1));
    t.id = it->second;
  };
  visit(rule.head.subject);
  visit(rule.head.object);
  for (auto& a : rule.body) {
    visit(a.subject);
    visit(a.object);
  }
  return rule;
}

bool is_connected(const Rule& rule) {
  std::map<std::uint32_t, int> uses;
  auto visit = [&](const Term& t) {
    if (t.is_variable()) ++uses[t.id];
  };
  visit(rule.head.subject);
  visit(rule.head.object);
  for (const auto& a : rule.body) {
    visit(a.subject);
    visit(a.object);
  }
  return std::all_of(uses.begin(), uses.end(), [](const auto& kv) { return kv.second >= 2; });
}

std::string format_term(const Term& term, const Vocabulary& vocab) {
  if (term.is_variable()) return "?V" + std::to_string(term.id);
  return vocab.entity_name(term.id);
}

std::string format_atom(const Atom& atom, const Vocabulary& vocab) {
  return "(" + format_term(atom.subject, vocab) + ", " + vocab.relation_name(atom.relation) + ", " +
         format_term(atom.object, vocab) + ")";
}

std::string format_rule(const Rule& rule, const Vocabulary& vocab) {
  std::string out = format_atom(rule.head, vocab) + " <=";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    out += i == 0 ? " " : " & ";
    out += format_atom(rule.body[i], vocab);
  }
  return out;
}

namespace {

Term parse_term(std::string_view s, const Vocabulary& vocab) {
  if (s.size() > 2 && s.substr(0, 2) == "?V") {
    std::uint32_t id = 0;
    for (char c : s.substr(2)) {
      if (c < '0' || c > '9') throw DataError("bad variable '" + std::string(s) + "'");
      id = id * 10 + static_cast<std::uint32_t>(c - '0');
    }
    if (id == 0) throw DataError("variable ids start at 1");
    return Term::variable(id);
  }
  return Term::constant(vocab.entity_id(s));
}

Atom parse_atom(std::string_view s, const Vocabulary& vocab) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') {
    throw DataError("atom must be parenthesized: '" + std::string(s) + "'");
  }
  s = s.substr(1, s.size() - 2);
  auto a = s.find(", ");
  auto b = a == std::string_view::npos ? a : s.find(", ", a + 2);
  if (b == std::string_view::npos || s.find(", ", b + 2) != std::string_view::npos) {
    throw DataError("atom must have three comma-separated parts");
  }
  return Atom{parse_term(s.substr(0, a), vocab), vocab.relation_id(s.substr(a + 2, b - a - 2)),
              parse_term(s.substr(b + 2), vocab)};
}

}  // namespace

Rule parse_rule(std::string_view text, const Vocabulary& vocab) {
  auto arrow = text.find(" <= ");
  if (arrow == std::string_view::npos) throw DataError("rule needs ' <= '");
  Rule rule;
  rule.head = parse_atom(text.substr(0, arrow), vocab);
  auto rest = text.substr(arrow + 4);
  while (true) {
    auto amp = rest.find(" & ");
    rule.body.push_back(parse_atom(rest.substr(0, amp), vocab));
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 3);
  }
  return rule;
}

}  // namespace xkgat
