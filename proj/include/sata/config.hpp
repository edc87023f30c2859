#pragma once

#include <string>

#include "sata/model.hpp"
#include "sata/training.hpp"

namespace sata::config {

// Run-level configuration shared by the CLI subcommands. Serialized as flat
// key=value lines with section dots (model.hidden=256); unknown keys are
// rejected with their key path.
struct RunConfig {
  uint64_t seed = 0;
  model::ModelConfig model;
  training::LossWeights loss;
  std::string stitch_mode = "crop";  // crop | blend
  std::string fs_variant = "plain";  // plain | height
  std::string units = "auto";       // auto | m | cm
  int epochs = 100;
  int max_steps = 0;
  int batch_size = 4;
  double lr = 1e-4;
  int warmup_epochs = 30;
  double lr_gamma = 0.99;
  double lr_min_factor = 0.01;
  int ckpt_every = 0;
};

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Effective-config echo for output artifacts.
std::string to_json(const RunConfig& cfg);

bvh::UnitPolicy unit_policy(const std::string& units);

}  // namespace sata::config
