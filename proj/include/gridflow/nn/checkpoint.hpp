#pragma once

// Checkpoint interchange format: named parameter table with row-major 32-bit
// little-endian floats, plus a JSON manifest alongside. A separate 64-bit
// resume blob (parameters + optimizer moments) makes interrupted training
// continue bit-exactly.

#include <string>

#include "gridflow/nn/adam.hpp"

namespace gridflow::nn {

// Writes path (binary table) and path + ".json" (the manifest verbatim).
void save_checkpoint(const std::string& path, const ParamTable& params,
                     const std::string& manifest_json);
ParamTable load_checkpoint(const std::string& path);
std::string load_checkpoint_manifest(const std::string& path);

void save_train_state(const std::string& path, const ParamTable& params, const AdamState& st,
                      int next_epoch);
// Returns false when the file does not exist.
bool load_train_state(const std::string& path, ParamTable& params, AdamState& st,
                      int& next_epoch);

}  // namespace gridflow::nn
