#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolm/model.hpp"

namespace biolm::checkpoint {

// On-disk container: magic + version, a JSON config record, then named
// tensors (name, shape, row-major 32-bit floats). Round-trips bit-exactly.
struct Checkpoint {
  model::ModelParams params;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  // Extra tensors outside the model proper (e.g. the learned prompt
  // embeddings under "prompt.embed").
  std::vector<std::pair<std::string, Tensor>> extra;

  const Tensor* find_extra(const std::string& name) const;
};

void save(const std::string& path, const Checkpoint& ckpt);
Checkpoint load(const std::string& path);

// Elementwise arithmetic mean of every tensor across the given checkpoints.
// All checkpoints must share the same config and tensor set; meta is taken
// from the first.
Checkpoint average(const std::vector<std::string>& paths);

}  // namespace biolm::checkpoint
