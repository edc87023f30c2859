#include "sata/model.hpp"

#include "json.hpp"

namespace sata::model {

void ModelConfig::validate() const {
  if (hidden <= 0 || heads <= 0 || hidden % heads != 0)
    throw Error("InvalidConfig", "hidden must be a positive multiple of heads");
  if (window <= overlap || overlap < 0)
    throw Error("InvalidConfig", "window must exceed overlap and overlap must be >= 0");
  if (blocks_per_side < 1) throw Error("InvalidConfig", "blocks_per_side must be >= 1");
  if (d_text <= 0 || sincos_bands <= 0 || ff_inner <= 0 || bottleneck.latent <= 0)
    throw Error("InvalidConfig", "dimensions must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw Error("InvalidConfig", "dropout must lie in [0, 1)");
  if (bottleneck.kind == BottleneckConfig::Kind::RVQ &&
      (bottleneck.quantizers < 1 || bottleneck.codebook < 1))
    throw Error("InvalidConfig", "RVQ needs at least one quantizer and codebook entry");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["hidden"] = hidden;
  j["heads"] = heads;
  j["dropout"] = dropout;
  j["ff_inner"] = ff_inner;
  j["blocks_per_side"] = blocks_per_side;
  j["d_text"] = d_text;
  j["sincos_bands"] = sincos_bands;
  j["window"] = window;
  j["overlap"] = overlap;
  j["temporal_blocks"] = temporal_blocks;
  j["decoder_seam_per_block"] = decoder_seam_per_block;
  j["bottleneck"] = {
      {"kind", bottleneck.kind == BottleneckConfig::Kind::VAE ? "vae" : "rvq"},
      {"latent", bottleneck.latent},
      {"quantizers", bottleneck.quantizers},
      {"codebook", bottleneck.codebook}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("ConfigError", std::string("model config: ") + e.what());
  }
  ModelConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.heads = j.at("heads").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.ff_inner = j.at("ff_inner").get<int>();
  c.blocks_per_side = j.at("blocks_per_side").get<int>();
  c.d_text = j.at("d_text").get<int>();
  c.sincos_bands = j.at("sincos_bands").get<int>();
  c.window = j.at("window").get<int>();
  c.overlap = j.at("overlap").get<int>();
  c.temporal_blocks = j.at("temporal_blocks").get<bool>();
  c.decoder_seam_per_block = j.at("decoder_seam_per_block").get<bool>();
  const auto& b = j.at("bottleneck");
  c.bottleneck.kind = b.at("kind").get<std::string>() == "rvq"
                          ? BottleneckConfig::Kind::RVQ
                          : BottleneckConfig::Kind::VAE;
  c.bottleneck.latent = b.at("latent").get<int>();
  c.bottleneck.quantizers = b.at("quantizers").get<int>();
  c.bottleneck.codebook = b.at("codebook").get<int>();
  c.validate();
  return c;
}

std::vector<int> to_node_major_indices(int T, int N) {
  std::vector<int> idx(static_cast<size_t>(T) * N);
  for (int j = 0; j < N; ++j)
    for (int t = 0; t < T; ++t) idx[static_cast<size_t>(j) * T + t] = t * N + j;
  return idx;
}

std::vector<int> to_frame_major_indices(int T, int N) {
  std::vector<int> idx(static_cast<size_t>(T) * N);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < N; ++j) idx[static_cast<size_t>(t) * N + j] = j * T + t;
  return idx;
}

}  // namespace sata::model
