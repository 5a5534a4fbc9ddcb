#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "xkgat/kg_store.hpp"

namespace xkgat {

enum class RuleKind { association, path };

/// A rule argument: a variable `?V<id>` (ids dense from 1) or an entity constant.
struct Term {
  enum class Kind : std::uint8_t { variable, constant };

  Kind kind = Kind::constant;
  std::uint32_t id = 0;

  static Term variable(std::uint32_t index) { return {Kind::variable, index}; }
  static Term constant(EntityId entity) { return {Kind::constant, entity}; }
  bool is_variable() const noexcept { return kind == Kind::variable; }

  friend auto operator<=>(const Term&, const Term&) = default;
};

struct Atom {
  Term subject;
  RelationId relation = 0;
  Term object;

  friend auto operator<=>(const Atom&, const Atom&) = default;
};

/// head <= body[0] & body[1] & ...
struct Rule {
  Atom head;
  std::vector<Atom> body;

  /// Path rules carry a variable in the head object; association rules a constant.
  RuleKind kind() const noexcept {
    return head.object.is_variable() ? RuleKind::path : RuleKind::association;
  }
  std::uint32_t variable_count() const;

  friend auto operator<=>(const Rule&, const Rule&) = default;
};

/// Renumbers variables 1..k in order of first appearance (head subject, head
/// object, then body atoms left to right). Two rules that differ only by a
/// variable renaming normalize to equal values.
Rule normalize(Rule rule);

/// True when every variable occurs at least twice across the rule's atoms.
bool is_connected(const Rule& rule);

std::string format_term(const Term& term, const Vocabulary& vocab);
std::string format_atom(const Atom& atom, const Vocabulary& vocab);
/// `(?V1, r, c) <= (?V1, r2, c2) & ...`
std::string format_rule(const Rule& rule, const Vocabulary& vocab);
/// Inverse of format_rule. Names must not contain ", " or the separators.
Rule parse_rule(std::string_view text, const Vocabulary& vocab);

}  // namespace xkgat
