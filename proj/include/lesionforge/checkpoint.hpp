#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lesionforge/json_util.hpp"
#include "lesionforge/tensor.hpp"

namespace lesionforge::tensornet {

// Checkpoint container format, little-endian:
//   magic "LFCK" | u32 version (=1) | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u32 dims... | f32 data
// A JSON manifest (architecture description, step count, seed) sits next to
// the binary at <path>.json.

struct Checkpoint {
    std::map<std::string, Tensor> tensors;
    Json manifest;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<Param*>& params,
                     const Json& manifest);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies tensors into params by name; every param must be present with a
// matching shape.
void apply_checkpoint(const Checkpoint& ckpt, const std::vector<Param*>& params);

}  // namespace lesionforge::tensornet
