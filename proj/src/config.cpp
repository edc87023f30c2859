#include "sata/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sata::config {

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t used;
    int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error("ConfigError", key + ": expected integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error("ConfigError", key + ": expected number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw Error("ConfigError", key + ": expected boolean, got '" + v + "'");
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t used;
    uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error("ConfigError", key + ": expected unsigned integer, got '" + v + "'");
  }
}

}  // namespace

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = to_int(k, v); }},
      {"max_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_steps = to_int(k, v); }},
      {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = to_int(k, v); }},
      {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr = to_double(k, v); }},
      {"warmup_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.warmup_epochs = to_int(k, v); }},
      {"lr_gamma", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr_gamma = to_double(k, v); }},
      {"lr_min_factor", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr_min_factor = to_double(k, v); }},
      {"ckpt_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.ckpt_every = to_int(k, v); }},
      {"stitch", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "crop" && v != "blend") throw Error("ConfigError", k + ": expected crop|blend");
         c.stitch_mode = v;
       }},
      {"fs_variant", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "plain" && v != "height") throw Error("ConfigError", k + ": expected plain|height");
         c.fs_variant = v;
       }},
      {"units", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "auto" && v != "m" && v != "cm") throw Error("ConfigError", k + ": expected auto|m|cm");
         c.units = v;
       }},
      {"model.hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.hidden = to_int(k, v); }},
      {"model.heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.heads = to_int(k, v); }},
      {"model.dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.dropout = to_double(k, v); }},
      {"model.ff_inner", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.ff_inner = to_int(k, v); }},
      {"model.blocks_per_side", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.blocks_per_side = to_int(k, v); }},
      {"model.d_text", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.d_text = to_int(k, v); }},
      {"model.sincos_bands", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.sincos_bands = to_int(k, v); }},
      {"model.window", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.window = to_int(k, v); }},
      {"model.overlap", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.overlap = to_int(k, v); }},
      {"model.temporal_blocks", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.temporal_blocks = to_bool(k, v); }},
      {"model.decoder_seam_per_block", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.decoder_seam_per_block = to_bool(k, v); }},
      {"model.bottleneck", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "vae") c.model.bottleneck.kind = model::BottleneckConfig::Kind::VAE;
         else if (v == "rvq") c.model.bottleneck.kind = model::BottleneckConfig::Kind::RVQ;
         else throw Error("ConfigError", k + ": expected vae|rvq");
       }},
      {"model.latent", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.bottleneck.latent = to_int(k, v); }},
      {"model.quantizers", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.bottleneck.quantizers = to_int(k, v); }},
      {"model.codebook", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.bottleneck.codebook = to_int(k, v); }},
      {"loss.w_rot", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_rot = to_double(k, v); }},
      {"loss.w_pos", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_pos = to_double(k, v); }},
      {"loss.w_vel", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_vel = to_double(k, v); }},
      {"loss.w_contact", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_contact = to_double(k, v); }},
      {"loss.w_penetration", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_penetration = to_double(k, v); }},
      {"loss.w_smooth", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_smooth = to_double(k, v); }},
      {"loss.w_bce", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_bce = to_double(k, v); }},
      {"loss.w_root", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.w_root = to_double(k, v); }},
      {"loss.lambda_kl", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.lambda_kl = to_double(k, v); }},
      {"loss.lambda_commit", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.lambda_commit = to_double(k, v); }},
      {"loss.lambda_codebook", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.lambda_codebook = to_double(k, v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw Error("ConfigError", "unknown key '" + key + "'");
  it->second(cfg, key, value);
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t");
      size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("ConfigError",
                  "line " + std::to_string(line_no) + ": expected key=value");
    apply_kv(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw Error("ConfigError", "cannot open '" + path + "'");
  std::string text(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>{});
  return parse_config_text(text, std::move(base));
}

std::string to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["model"] = nlohmann::json::parse(cfg.model.to_json());
  j["loss"] = {{"w_rot", cfg.loss.w_rot},
               {"w_pos", cfg.loss.w_pos},
               {"w_vel", cfg.loss.w_vel},
               {"w_contact", cfg.loss.w_contact},
               {"w_penetration", cfg.loss.w_penetration},
               {"w_smooth", cfg.loss.w_smooth},
               {"w_bce", cfg.loss.w_bce},
               {"w_root", cfg.loss.w_root},
               {"lambda_kl", cfg.loss.lambda_kl},
               {"lambda_commit", cfg.loss.lambda_commit},
               {"lambda_codebook", cfg.loss.lambda_codebook}};
  j["stitch"] = cfg.stitch_mode;
  j["fs_variant"] = cfg.fs_variant;
  j["units"] = cfg.units;
  j["epochs"] = cfg.epochs;
  j["max_steps"] = cfg.max_steps;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["warmup_epochs"] = cfg.warmup_epochs;
  j["lr_gamma"] = cfg.lr_gamma;
  j["lr_min_factor"] = cfg.lr_min_factor;
  j["ckpt_every"] = cfg.ckpt_every;
  return j.dump();
}

bvh::UnitPolicy unit_policy(const std::string& units) {
  if (units == "m") return bvh::UnitPolicy::Meters;
  if (units == "cm") return bvh::UnitPolicy::Centimeters;
  return bvh::UnitPolicy::Auto;
}

}  // namespace sata::config
