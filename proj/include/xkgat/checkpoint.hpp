#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xkgat/kg_store.hpp"
#include "xkgat/model.hpp"

namespace xkgat {

enum class ModelKind { attention, transe };

/// On disk: a directory holding meta.json, entities.txt, relations.txt and
/// one little-endian float64 row-major file per embedding table.
struct Checkpoint {
  ModelKind kind = ModelKind::attention;
  Parameters<double> params;
  ModelConfig model;
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;  // canonical relations, id order
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  int epoch = 0;
};

Checkpoint make_checkpoint(ModelKind kind, Parameters<double> params, const ModelConfig& model,
                           const Vocabulary& vocab, std::uint64_t seed);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Throws DataError unless the checkpoint's intern tables match `vocab`.
void check_compatible(const Checkpoint& checkpoint, const Vocabulary& vocab);
/// Throws DataError unless the embedding dimension is `dim`.
void check_dimension(const Checkpoint& checkpoint, int dim);

const char* to_string(ModelKind kind);

}  // namespace xkgat
