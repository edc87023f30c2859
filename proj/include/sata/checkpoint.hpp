#pragma once

#include <string>
#include <vector>

#include "sata/model.hpp"

namespace sata::ckpt {

// Binary layout: magic "SATA", u32 format version, u32 config length + JSON
// config blob, then per parameter: u32 name length, name bytes, u32 rank,
// u32 dims, little-endian float32 payload. Parameters run to end of file.
std::vector<uint8_t> serialize_checkpoint(const model::ModelConfig& cfg,
                                          const model::ParamSetT<float>& params);

struct LoadedCheckpoint {
  model::ModelConfig config;
  std::vector<std::pair<std::string, ad::Tensor>> params;
};

LoadedCheckpoint parse_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const std::string& path, const model::ModelConfig& cfg,
                     const model::ParamSetT<float>& params);
LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies loaded tensors into a freshly initialized model; every parameter
// must match by name and shape.
void apply_checkpoint(model::SataModel& m, const LoadedCheckpoint& ck);

// Convenience: build + load in one step.
std::unique_ptr<model::SataModel> model_from_checkpoint(const LoadedCheckpoint& ck);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace sata::ckpt
