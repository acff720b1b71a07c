#ifndef DEEPSEQ_CHECKPOINT_HPP
#define DEEPSEQ_CHECKPOINT_HPP

#include "deepseq/models.hpp"
#include "deepseq/params.hpp"

#include <filesystem>
#include <string>

namespace deepseq {

struct Checkpoint {
  ModelSpec spec;
  ParamSet params;
  std::string config_hash;
  int refit_year = 0;
};

/// Serializes to JSON text. Doubles are written in shortest round-trip form,
/// so load(save(c)) reproduces every parameter bit for bit.
std::string checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
/// Throws DataError if the file cannot be read and ShapeError if it is
/// malformed or its parameters do not fit its spec.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string spec_to_json(const ModelSpec& spec);

}  // namespace deepseq

#endif  // DEEPSEQ_CHECKPOINT_HPP
