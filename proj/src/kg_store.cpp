#include "xkgat/kg_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace xkgat {

namespace fs = std::filesystem;

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

// ---------------------------------------------------------------------------
// Vocabulary

EntityId Vocabulary::intern_entity(std::string_view name) {
  if (name.empty()) throw DataError("empty entity name");
  auto key = std::string(name);
  if (auto it = entity_index_.find(key); it != entity_index_.end()) return it->second;
  auto id = static_cast<EntityId>(entities_.size());
  entities_.push_back(key);
  entity_index_.emplace(std::move(key), id);
  return id;
}

RelationId Vocabulary::intern_relation(std::string_view name) {
  if (name.empty()) throw DataError("empty relation name");
  auto key = std::string(name);
  if (auto it = relation_index_.find(key); it != relation_index_.end()) return it->second;
  if (name.ends_with(kInverseSuffix)) {
    throw DataError("relation name '" + key + "' uses the reserved suffix " +
                    std::string(kInverseSuffix));
  }
  if (has_inverses()) throw DataError("cannot add relation '" + key + "' after inverse augmentation");
  auto id = static_cast<RelationId>(relations_.size());
  relations_.push_back(RelationInfo{id, std::nullopt, false, key});
  relation_index_.emplace(std::move(key), id);
  ++canonical_count_;
  return id;
}

std::optional<EntityId> Vocabulary::find_entity(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocabulary::find_relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

EntityId Vocabulary::entity_id(std::string_view name) const {
  if (auto id = find_entity(name)) return *id;
  throw DataError("unknown entity '" + std::string(name) + "'");
}

RelationId Vocabulary::relation_id(std::string_view name) const {
  if (auto id = find_relation(name)) return *id;
  throw DataError("unknown relation '" + std::string(name) + "'");
}

Vocabulary Vocabulary::with_inverses() const {
  if (has_inverses()) throw DataError("store is already augmented with inverse relations");
  Vocabulary out = *this;
  const auto n = static_cast<RelationId>(canonical_count_);
  for (RelationId r = 0; r < n; ++r) {
    RelationId inv = n + r;
    std::string name = relations_[r].name + std::string(kInverseSuffix);
    out.relations_[r].inverse = inv;
    out.relations_.push_back(RelationInfo{r, r, true, name});
    out.relation_index_.emplace(std::move(name), inv);
  }
  return out;
}

// ---------------------------------------------------------------------------
// TripleStore

std::span<const std::uint32_t> TripleStore::Postings::get(std::size_t key) const {
  if (key + 1 >= offsets.size()) return {};
  return std::span<const std::uint32_t>(items).subspan(offsets[key], offsets[key + 1] - offsets[key]);
}

namespace {

template <typename KeyFn>
void build_postings(std::span<const Triple> triples, std::size_t n_keys, KeyFn key,
                    std::vector<std::uint32_t>& offsets, std::vector<std::uint32_t>& items) {
  offsets.assign(n_keys + 1, 0);
  for (const auto& t : triples) ++offsets[key(t) + 1];
  for (std::size_t k = 0; k < n_keys; ++k) offsets[k + 1] += offsets[k];
  items.resize(triples.size());
  auto cursor = offsets;
  for (std::uint32_t i = 0; i < triples.size(); ++i) items[cursor[key(triples[i])]++] = i;
}

}  // namespace

TripleStore::TripleStore() : TripleStore(std::make_shared<const Vocabulary>(), {}) {}

TripleStore::TripleStore(std::shared_ptr<const Vocabulary> vocab, std::vector<Triple> triples)
    : vocab_(std::move(vocab)), triples_(std::move(triples)) {
  const auto n_ent = vocab_->num_entities();
  const auto n_rel = vocab_->num_relations();
  for (const auto& t : triples_) {
    if (t.head >= n_ent || t.tail >= n_ent || t.relation >= n_rel) {
      throw DataError("triple references an id outside the vocabulary");
    }
  }
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());

  build_postings(triples_, n_ent, [](const Triple& t) { return t.head; }, by_head_.offsets,
                 by_head_.items);
  build_postings(triples_, n_ent, [](const Triple& t) { return t.tail; }, by_tail_.offsets,
                 by_tail_.items);
  build_postings(triples_, n_rel, [](const Triple& t) { return t.relation; },
                 by_relation_.offsets, by_relation_.items);
  for (const auto& t : triples_) {
    by_head_relation_[pair_key(t.head, t.relation)].push_back(t.tail);
    by_relation_tail_[pair_key(t.relation, t.tail)].push_back(t.head);
  }
  for (auto& [key, heads] : by_relation_tail_) std::sort(heads.begin(), heads.end());
}

bool TripleStore::contains(const Triple& t) const {
  return std::binary_search(triples_.begin(), triples_.end(), t);
}

std::span<const EntityId> TripleStore::tails(EntityId head, RelationId relation) const {
  auto it = by_head_relation_.find(pair_key(head, relation));
  if (it == by_head_relation_.end()) return {};
  return it->second;
}

std::span<const EntityId> TripleStore::heads(RelationId relation, EntityId tail) const {
  auto it = by_relation_tail_.find(pair_key(relation, tail));
  if (it == by_relation_tail_.end()) return {};
  return it->second;
}

// ---------------------------------------------------------------------------
// Files

namespace {

template <typename Resolve>
std::vector<Triple> parse_triples(std::istream& in, const std::string& source, Resolve&& resolve) {
  std::vector<Triple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find('\t');
    const auto second = first == std::string::npos ? first : line.find('\t', first + 1);
    if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos) {
      throw ParseError(source, line_no, "expected exactly three tab-separated fields");
    }
    std::string_view view(line);
    auto head = view.substr(0, first);
    auto rel = view.substr(first + 1, second - first - 1);
    auto tail = view.substr(second + 1);
    if (head.empty() || rel.empty() || tail.empty()) {
      throw ParseError(source, line_no, "empty field");
    }
    try {
      out.push_back(resolve(head, rel, tail));
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<Triple> read_triples(std::istream& in, Vocabulary& vocab, const std::string& source) {
  return parse_triples(in, source, [&](auto h, auto r, auto t) {
    // interning order: head, relation, tail
    auto head = vocab.intern_entity(h);
    auto rel = vocab.intern_relation(r);
    auto tail = vocab.intern_entity(t);
    return Triple{head, rel, tail};
  });
}

std::vector<Triple> read_triples(const fs::path& path, Vocabulary& vocab) {
  auto in = open_input(path);
  return read_triples(in, vocab, path.string());
}

std::vector<Triple> read_known_triples(const fs::path& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  return parse_triples(in, path.string(), [&](auto h, auto r, auto t) {
    return Triple{vocab.entity_id(h), vocab.relation_id(r), vocab.entity_id(t)};
  });
}

TripleStore load_triples(const fs::path& path) {
  auto vocab = std::make_shared<Vocabulary>();
  auto triples = read_triples(path, *vocab);
  if (triples.empty()) throw DataError(path.string() + ": no triples");
  return TripleStore(std::move(vocab), std::move(triples));
}

void write_triples(std::ostream& out, std::span<const Triple> triples, const Vocabulary& vocab) {
  for (const auto& t : triples) {
    out << vocab.entity_name(t.head) << '\t' << vocab.relation_name(t.relation) << '\t'
        << vocab.entity_name(t.tail) << '\n';
  }
}

void write_triples(const fs::path& path, std::span<const Triple> triples, const Vocabulary& vocab) {
  std::ostringstream buf;
  write_triples(buf, triples, vocab);
  write_file_atomic(path, buf.str());
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::string> read_lines(const fs::path& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// ---------------------------------------------------------------------------
// Inverses

TripleStore augment_inverses(const TripleStore& store) {
  auto vocab = std::make_shared<const Vocabulary>(store.vocab().with_inverses());
  std::vector<Triple> triples(store.triples().begin(), store.triples().end());
  triples.reserve(triples.size() * 2);
  for (const auto& t : store.triples()) {
    triples.push_back(Triple{t.tail, *vocab->relation(t.relation).inverse, t.head});
  }
  return TripleStore(std::move(vocab), std::move(triples));
}

Triple canonicalize(const Triple& triple, const Vocabulary& vocab) {
  const auto& info = vocab.relation(triple.relation);
  if (!info.is_inverse) return triple;
  return Triple{triple.tail, info.canonical, triple.head};
}

std::optional<Triple> inverse_of(const Triple& triple, const Vocabulary& vocab) {
  const auto& info = vocab.relation(triple.relation);
  if (!info.inverse) return std::nullopt;
  return Triple{triple.tail, *info.inverse, triple.head};
}

// ---------------------------------------------------------------------------
// Splits

Split split_dataset(const TripleStore& store, std::span<const RelationId> target_relations,
                    const SplitOptions& options) {
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw DataError("test_fraction must lie in (0, 1)");
  }
  if (!(options.valid_fraction >= 0.0 && options.valid_fraction < 1.0)) {
    throw DataError("valid_fraction must lie in [0, 1)");
  }
  if (store.vocab().has_inverses()) throw DataError("split the store before inverse augmentation");

  std::vector<RelationId> targets(target_relations.begin(), target_relations.end());
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  if (targets.empty()) throw DataError("no target relations");

  std::mt19937_64 rng(mix_seed(options.seed, 0x5b1d));
  Split split;
  split.target_relations = targets;
  std::vector<Triple> train;
  std::vector<bool> is_target(store.vocab().num_relations(), false);

  for (RelationId r : targets) {
    if (r >= store.vocab().num_relations()) throw DataError("target relation id out of range");
    is_target[r] = true;
    std::vector<Triple> rel_triples;
    for (auto pos : store.by_relation(r)) rel_triples.push_back(store.triples()[pos]);
    if (rel_triples.size() < 2) {
      throw DataError("target relation '" + store.vocab().relation_name(r) +
                      "' has fewer than 2 triples");
    }
    std::shuffle(rel_triples.begin(), rel_triples.end(), rng);
    const auto count = static_cast<long long>(rel_triples.size());
    auto n_test = std::clamp(std::llround(options.test_fraction * static_cast<double>(count)), 1LL,
                             count - 1);
    auto remaining = count - n_test;
    auto n_valid = std::clamp(std::llround(options.valid_fraction * static_cast<double>(remaining)),
                              0LL, remaining - 1);
    auto it = rel_triples.begin();
    split.test.insert(split.test.end(), it, it + n_test);
    it += n_test;
    split.valid.insert(split.valid.end(), it, it + n_valid);
    it += n_valid;
    train.insert(train.end(), it, rel_triples.end());
  }
  if (options.regime == SplitRegime::all) {
    for (const auto& t : store.triples()) {
      if (!is_target[t.relation]) train.push_back(t);
    }
  }
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.valid.begin(), split.valid.end());
  split.train = TripleStore(store.vocab_ptr(), std::move(train));
  return split;
}

std::vector<RelationId> read_target_relations(const fs::path& path, const Vocabulary& vocab) {
  std::vector<RelationId> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    auto id = vocab.find_relation(line);
    if (!id) throw ParseError(path.string(), line_no, "unknown relation '" + line + "'");
    out.push_back(*id);
  }
  if (out.empty()) throw DataError(path.string() + ": no target relations");
  return out;
}

void save_split(const Split& split, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& vocab = split.train.vocab();
  std::string buf;
  for (const auto& name : vocab.entity_names()) buf += name + '\n';
  write_file_atomic(dir / "entities.txt", buf);
  buf.clear();
  for (RelationId r = 0; r < vocab.num_canonical_relations(); ++r) buf += vocab.relation_name(r) + '\n';
  write_file_atomic(dir / "relations.txt", buf);
  std::vector<Triple> train;
  for (const auto& t : split.train.triples()) {
    if (!vocab.relation(t.relation).is_inverse) train.push_back(t);
  }
  write_triples(dir / "train.tsv", train, vocab);
  write_triples(dir / "valid.tsv", split.valid, vocab);
  write_triples(dir / "test.tsv", split.test, vocab);
  buf.clear();
  for (RelationId r : split.target_relations) buf += vocab.relation_name(r) + '\n';
  write_file_atomic(dir / "targets.txt", buf);
}

Split load_split(const fs::path& dir) {
  auto vocab = std::make_shared<Vocabulary>();
  for (const auto& name : read_lines(dir / "entities.txt")) vocab->intern_entity(name);
  for (const auto& name : read_lines(dir / "relations.txt")) vocab->intern_relation(name);
  Split split;
  auto train = read_known_triples(dir / "train.tsv", *vocab);
  split.valid = read_known_triples(dir / "valid.tsv", *vocab);
  split.test = read_known_triples(dir / "test.tsv", *vocab);
  split.target_relations = read_target_relations(dir / "targets.txt", *vocab);
  split.train = TripleStore(std::move(vocab), std::move(train));
  return split;
}

}  // namespace xkgat
