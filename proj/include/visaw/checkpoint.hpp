#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "visaw/params.hpp"

namespace visaw {

// Binary checkpoint: 8-byte magic, little-endian u64 manifest length, JSON
// manifest, then the concatenated parameter payload as little-endian
// doubles in manifest order. The manifest carries a config snapshot so a
// later stage can recover the settings it was produced with.

struct LoadedCheckpoint {
  std::string module;
  unsigned long long seed = 0;
  nlohmann::json config;
  ParamList params;
  std::vector<std::string> ids;  // only for index checkpoints

  const Tensor& tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const std::string& module,
                     const ParamList& params, const nlohmann::json& config,
                     unsigned long long seed,
                     const std::vector<std::string>* ids = nullptr);

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies loaded values into an existing parameter list, matching by name.
// Every destination parameter must be present with an identical shape.
void load_into(const LoadedCheckpoint& ckpt, ParamList& params);

}  // namespace visaw
