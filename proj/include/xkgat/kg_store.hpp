#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "xkgat/types.hpp"

namespace xkgat {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    return static_cast<std::size_t>(
        mix_seed((std::uint64_t{t.head} << 32) | t.tail, t.relation));
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

/// Reserved suffix for the surface name of an inverse relation.
inline constexpr std::string_view kInverseSuffix = "~inv";

struct RelationInfo {
  RelationId canonical = 0;
  std::optional<RelationId> inverse;
  bool is_inverse = false;
  std::string name;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Intern tables for entities and relations. Ids are dense and assigned in
/// first-seen order.
class Vocabulary {
 public:
  EntityId intern_entity(std::string_view name);
  /// Canonical relations only; names ending in kInverseSuffix are rejected,
  /// as is interning after inverses were added.
  RelationId intern_relation(std::string_view name);

  std::optional<EntityId> find_entity(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;
  EntityId entity_id(std::string_view name) const;
  RelationId relation_id(std::string_view name) const;

  const std::string& entity_name(EntityId id) const { return entities_.at(id); }
  const RelationInfo& relation(RelationId id) const { return relations_.at(id); }
  const std::string& relation_name(RelationId id) const { return relations_.at(id).name; }

  std::size_t num_entities() const noexcept { return entities_.size(); }
  std::size_t num_relations() const noexcept { return relations_.size(); }
  std::size_t num_canonical_relations() const noexcept { return canonical_count_; }
  bool has_inverses() const noexcept { return relations_.size() > canonical_count_; }

  std::span<const std::string> entity_names() const noexcept { return entities_; }

  /// Copy of this vocabulary with `<name>~inv` appended for every canonical
  /// relation; canonical ids keep their values.
  Vocabulary with_inverses() const;

 private:
  std::vector<std::string> entities_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::vector<RelationInfo> relations_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::size_t canonical_count_ = 0;
};

/// Immutable, indexed set of triples over a shared vocabulary.
class TripleStore {
 public:
  TripleStore();
  TripleStore(std::shared_ptr<const Vocabulary> vocab, std::vector<Triple> triples);

  const Vocabulary& vocab() const noexcept { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocab_ptr() const noexcept { return vocab_; }

  /// Sorted by (head, relation, tail); no duplicates.
  std::span<const Triple> triples() const noexcept { return triples_; }
  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }
  bool contains(const Triple& t) const;

  /// Positions into triples().
  std::span<const std::uint32_t> by_head(EntityId e) const { return by_head_.get(e); }
  std::span<const std::uint32_t> by_tail(EntityId e) const { return by_tail_.get(e); }
  std::span<const std::uint32_t> by_relation(RelationId r) const { return by_relation_.get(r); }

  /// Tails t with (head, relation, t) in the store, ascending.
  std::span<const EntityId> tails(EntityId head, RelationId relation) const;
  /// Heads h with (h, relation, tail) in the store, ascending.
  std::span<const EntityId> heads(RelationId relation, EntityId tail) const;

 private:
  struct Postings {
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> items;
    std::span<const std::uint32_t> get(std::size_t key) const;
  };
  static std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
    return (std::uint64_t{a} << 32) | b;
  }

  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<Triple> triples_;
  Postings by_head_;
  Postings by_tail_;
  Postings by_relation_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_head_relation_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> by_relation_tail_;
};

/// Reads `head<TAB>relation<TAB>tail` lines, interning unseen names into `vocab`.
std::vector<Triple> read_triples(std::istream& in, Vocabulary& vocab, const std::string& source);
std::vector<Triple> read_triples(const std::filesystem::path& path, Vocabulary& vocab);
/// Like read_triples but every name must already exist in `vocab`.
std::vector<Triple> read_known_triples(const std::filesystem::path& path, const Vocabulary& vocab);

TripleStore load_triples(const std::filesystem::path& path);
void write_triples(std::ostream& out, std::span<const Triple> triples, const Vocabulary& vocab);
void write_triples(const std::filesystem::path& path, std::span<const Triple> triples,
                   const Vocabulary& vocab);

TripleStore augment_inverses(const TripleStore& store);

/// (t, r, h) for an inverse triple (h, r~inv, t); other triples unchanged.
Triple canonicalize(const Triple& triple, const Vocabulary& vocab);
/// (t, r', h) where r' is the paired relation, if one exists.
std::optional<Triple> inverse_of(const Triple& triple, const Vocabulary& vocab);

enum class SplitRegime { all, part };

struct SplitOptions {
  double test_fraction = 0.2;
  double valid_fraction = 0.05;
  std::uint64_t seed = 0;
  SplitRegime regime = SplitRegime::all;
};

struct Split {
  TripleStore train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  std::vector<RelationId> target_relations;
};

Split split_dataset(const TripleStore& store, std::span<const RelationId> target_relations,
                    const SplitOptions& options);

std::vector<RelationId> read_target_relations(const std::filesystem::path& path,
                                              const Vocabulary& vocab);

/// Directory layout: entities.txt, relations.txt, train.tsv, valid.tsv,
/// test.tsv, targets.txt. Inverse triples in `split.train` are not written.
void save_split(const Split& split, const std::filesystem::path& dir);
Split load_split(const std::filesystem::path& dir);

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace xkgat
