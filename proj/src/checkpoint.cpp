#include "xkgat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace xkgat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "xkgat-checkpoint";
constexpr int kVersion = 1;

std::string encode_table(const Matrix<double>& table) {
  std::string bytes(static_cast<std::size_t>(table.size()) * sizeof(double), '\0');
  for (Index i = 0; i < table.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(table.data()[i]);
    for (int b = 0; b < 8; ++b) {
      bytes[static_cast<std::size_t>(i) * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  return bytes;
}

Matrix<double> decode_table(const fs::path& path, Index rows, Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double)) {
    throw DataError(path.string() + ": size does not match the declared table shape");
  }
  Matrix<double> table(rows, cols);
  for (Index i = 0; i < table.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= std::uint64_t{static_cast<unsigned char>(bytes[static_cast<std::size_t>(i) * 8 + b])}
              << (8 * b);
    }
    table.data()[i] = std::bit_cast<double>(bits);
  }
  return table;
}

std::string join_lines(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += n + '\n';
  return out;
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::transe ? "transe" : "attention"; }

Checkpoint make_checkpoint(ModelKind kind, Parameters<double> params, const ModelConfig& model,
                           const Vocabulary& vocab, std::uint64_t seed) {
  Checkpoint c;
  c.kind = kind;
  c.params = std::move(params);
  c.model = model;
  c.model.dim = static_cast<int>(c.params.dim());
  c.entity_names.assign(vocab.entity_names().begin(), vocab.entity_names().end());
  for (RelationId r = 0; r < vocab.num_canonical_relations(); ++r) {
    c.relation_names.push_back(vocab.relation_name(r));
  }
  c.seed = seed;
  return c;
}

void save_checkpoint(const Checkpoint& c, const fs::path& dir) {
  fs::create_directories(dir);
  json meta;
  meta["format"] = kFormat;
  meta["version"] = kVersion;
  meta["kind"] = to_string(c.kind);
  meta["dim"] = c.params.dim();
  meta["n_entities"] = c.params.entities.rows();
  meta["n_relations"] = c.params.relations.rows();
  meta["seed"] = c.seed;
  meta["iteration"] = c.iteration;
  meta["epoch"] = c.epoch;
  meta["model"] = {{"layers", c.model.layers},
                   {"omega", c.model.layer_weights()},
                   {"norm", c.model.norm == Norm::l1 ? "l1" : "l2"},
                   {"max_depth", c.model.max_depth},
                   {"neighbor_cap", c.model.neighbor_cap},
                   {"subgraph_seed", c.model.subgraph_seed}};
  meta["tables"] = {{"entities", "entity_embeddings.f64"}, {"relations", "relation_embeddings.f64"}};
  meta["vocab"] = {{"entities", "entities.txt"}, {"relations", "relations.txt"}};

  write_file_atomic(dir / "entity_embeddings.f64", encode_table(c.params.entities));
  write_file_atomic(dir / "relation_embeddings.f64", encode_table(c.params.relations));
  write_file_atomic(dir / "entities.txt", join_lines(c.entity_names));
  write_file_atomic(dir / "relations.txt", join_lines(c.relation_names));
  // metadata last: a checkpoint directory with meta.json is complete
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw DataError("no checkpoint at " + dir.string());
  json meta;
  try {
    meta = json::parse(in);
    if (meta.at("format") != kFormat || meta.at("version") != kVersion) {
      throw DataError("unsupported checkpoint format in " + dir.string());
    }
    Checkpoint c;
    c.kind = meta.at("kind") == "transe" ? ModelKind::transe : ModelKind::attention;
    const auto dim = meta.at("dim").get<Index>();
    const auto& model = meta.at("model");
    c.model.dim = static_cast<int>(dim);
    c.model.layers = model.at("layers").get<int>();
    c.model.omega = model.at("omega").get<std::vector<double>>();
    c.model.norm = model.at("norm") == "l2" ? Norm::l2 : Norm::l1;
    c.model.max_depth = model.at("max_depth").get<int>();
    c.model.neighbor_cap = model.at("neighbor_cap").get<std::size_t>();
    c.model.subgraph_seed = model.at("subgraph_seed").get<std::uint64_t>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.iteration = meta.at("iteration").get<std::int64_t>();
    c.epoch = meta.at("epoch").get<int>();
    c.params.entities = decode_table(dir / meta.at("tables").at("entities").get<std::string>(),
                                     meta.at("n_entities").get<Index>(), dim);
    c.params.relations = decode_table(dir / meta.at("tables").at("relations").get<std::string>(),
                                      meta.at("n_relations").get<Index>(), dim);
    c.entity_names = read_lines(dir / meta.at("vocab").at("entities").get<std::string>());
    c.relation_names = read_lines(dir / meta.at("vocab").at("relations").get<std::string>());
    if (c.entity_names.size() != static_cast<std::size_t>(c.params.entities.rows()) ||
        c.relation_names.size() != static_cast<std::size_t>(c.params.relations.rows())) {
      throw DataError("checkpoint intern tables do not match table shapes");
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(dir.string() + "/meta.json: " + e.what());
  }
}

void check_compatible(const Checkpoint& c, const Vocabulary& vocab) {
  if (c.entity_names.size() != vocab.num_entities() ||
      c.relation_names.size() != vocab.num_canonical_relations()) {
    throw DataError("checkpoint/store mismatch: " + std::to_string(c.entity_names.size()) +
                    " entities and " + std::to_string(c.relation_names.size()) +
                    " relations in checkpoint, " + std::to_string(vocab.num_entities()) + " and " +
                    std::to_string(vocab.num_canonical_relations()) + " in store");
  }
  for (std::size_t i = 0; i < c.entity_names.size(); ++i) {
    if (c.entity_names[i] != vocab.entity_name(static_cast<EntityId>(i))) {
      throw DataError("checkpoint/store mismatch at entity " + std::to_string(i));
    }
  }
  for (std::size_t r = 0; r < c.relation_names.size(); ++r) {
    if (c.relation_names[r] != vocab.relation_name(static_cast<RelationId>(r))) {
      throw DataError("checkpoint/store mismatch at relation " + std::to_string(r));
    }
  }
}

void check_dimension(const Checkpoint& c, int dim) {
  if (c.params.dim() != dim) {
    throw DataError("checkpoint dimension " + std::to_string(c.params.dim()) +
                    " does not match requested dimension " + std::to_string(dim));
  }
}

}  // namespace xkgat
