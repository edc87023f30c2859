#include "sata/semantics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace sata::sem {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string normalize_joint_name(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (std::isdigit(c)) continue;
    if (c == '-' || c == ' ' || c == '.' || c == ':') c = '_';
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  // Collapse separator runs and trim.
  std::string collapsed;
  for (char c : out) {
    if (c == '_' && (collapsed.empty() || collapsed.back() == '_')) continue;
    collapsed.push_back(c);
  }
  while (!collapsed.empty() && collapsed.back() == '_') collapsed.pop_back();
  if (collapsed.empty()) return lower(raw);
  return collapsed;
}

std::string TagDictionary::lookup(const std::string& raw_name) const {
  auto it = entries.find(raw_name);
  if (it != entries.end()) return it->second;
  std::string low = lower(raw_name);
  for (const auto& [k, v] : entries)
    if (lower(k) == low) return v;
  std::string norm = normalize_joint_name(raw_name);
  for (const auto& [k, v] : entries)
    if (normalize_joint_name(k) == norm) return v;
  return "";
}

TagDictionary TagDictionary::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("ConfigError", std::string("tags file: ") + e.what());
  }
  if (!j.is_object()) throw Error("ConfigError", "tags file must be a JSON object");
  TagDictionary dict;
  for (auto& [k, v] : j.items()) {
    if (!v.is_string())
      throw Error("ConfigError", "tags entry '" + k + "' must map to a string");
    dict.entries[k] = v.get<std::string>();
  }
  return dict;
}

std::string TagDictionary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : entries) j[k] = v;
  return j.dump(2) + "\n";
}

const TagDictionary& TagDictionary::human() {
  static const TagDictionary dict = [] {
    TagDictionary d;
    d.entries = {
        {"Hips", "the pelvis and hip root anchor"},
        {"LowerBack", "a lower back bone segment"},
        {"Spine", "a spine bone segment"},
        {"Spine1", "a spine bone segment"},
        {"Neck", "the neck bone"},
        {"Head", "the head bone"},
        {"Head_End", "the head crown tip"},
        {"LeftShoulder", "the left shoulder clavicle bone"},
        {"RightShoulder", "the right shoulder clavicle bone"},
        {"LeftArm", "the left upper arm bone"},
        {"RightArm", "the right upper arm bone"},
        {"LeftForeArm", "the left forearm bone"},
        {"RightForeArm", "the right forearm bone"},
        {"LeftHand", "the left hand bone"},
        {"RightHand", "the right hand bone"},
        {"LeftHand_End", "the left hand fingers tip"},
        {"RightHand_End", "the right hand fingers tip"},
        {"LeftUpLeg", "the left upper leg thigh bone"},
        {"RightUpLeg", "the right upper leg thigh bone"},
        {"LeftLeg", "the left lower leg calf bone"},
        {"RightLeg", "the right lower leg calf bone"},
        {"LeftFoot", "the left foot ankle bone"},
        {"RightFoot", "the right foot ankle bone"},
        {"LeftToeBase", "the left foot toes base"},
        {"RightToeBase", "the right foot toes base"},
        {"LeftToeBase_End", "the left toes tip"},
        {"RightToeBase_End", "the right toes tip"},
        {"LeftFoot_End", "the left foot toes tip"},
        {"RightFoot_End", "the right foot toes tip"},
    };
    return d;
  }();
  return dict;
}

const TagDictionary& TagDictionary::quadruped() {
  static const TagDictionary dict = [] {
    TagDictionary d;
    d.entries = {
        {"Hips", "the pelvis and hip root anchor"},
        {"Spine", "a spine bone segment"},
        {"Chest", "the chest bone segment"},
        {"Head", "the head bone"},
        {"Head_End", "the head crown tip"},
        {"Tail", "the tail bone segment"},
        {"Tail_End", "the tail tip"},
        {"frontLegUpr_joint", "The upper bone of the front leg"},
        {"LeftFrontUpLeg", "The upper bone of the front leg"},
        {"RightFrontUpLeg", "The upper bone of the front leg"},
        {"LeftFrontLeg", "the lower bone of the front leg above the paw"},
        {"RightFrontLeg", "the lower bone of the front leg above the paw"},
        {"LeftFrontLeg_End", "the front paw tip"},
        {"RightFrontLeg_End", "the front paw tip"},
        {"LeftHindUpLeg", "the upper bone of the hind leg"},
        {"RightHindUpLeg", "the upper bone of the hind leg"},
        {"LeftHindLeg", "the lower bone of the hind leg above the paw"},
        {"RightHindLeg", "the lower bone of the hind leg above the paw"},
        {"LeftHindLeg_End", "the hind paw tip"},
        {"RightHindLeg_End", "the hind paw tip"},
    };
    return d;
  }();
  return dict;
}

std::vector<std::string> resolve_descriptions(const bvh::Skeleton& skeleton,
                                              const TagDictionary& dict) {
  std::vector<std::string> out;
  out.reserve(skeleton.joints.size());
  for (const auto& j : skeleton.joints) {
    std::string desc = dict.lookup(j.name);
    if (desc.empty()) {
      desc = normalize_joint_name(j.name);
      warn("no description for joint '" + j.name + "'; falling back to '" + desc + "'");
    }
    out.push_back(desc);
  }
  return out;
}

HashEmbeddingProvider::HashEmbeddingProvider(int dimension, uint64_t seed)
    : dim_(dimension), seed_(seed) {
  if (dimension <= 0) throw Error("DimensionMismatch", "embedding dimension must be > 0");
}

std::vector<float> HashEmbeddingProvider::embed(const std::string& description) const {
  Rng rng(hash_combine(seed_, fnv1a(description)));
  std::vector<float> v(dim_);
  float sq = 0.0f;
  for (int i = 0; i < dim_; ++i) {
    v[i] = rng.uniform() * 2.0f - 1.0f;
    sq += v[i] * v[i];
  }
  float inv = 1.0f / std::sqrt(sq > 0.0f ? sq : 1.0f);
  for (auto& x : v) x *= inv;
  return v;
}

EmbeddingTable EmbeddingTable::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("ConfigError", std::string("embedding table: ") + e.what());
  }
  EmbeddingTable t;
  if (!j.contains("dimension") || !j.contains("vectors"))
    throw Error("ConfigError", "embedding table needs 'dimension' and 'vectors'");
  t.dimension = j["dimension"].get<int>();
  for (auto& [k, v] : j["vectors"].items()) {
    std::vector<float> vec = v.get<std::vector<float>>();
    if (static_cast<int>(vec.size()) != t.dimension)
      throw Error("DimensionMismatch",
                  "embedding for '" + k + "' has wrong dimension");
    for (float x : vec)
      if (!std::isfinite(x))
        throw Error("ConfigError", "embedding for '" + k + "' has non-finite values");
    t.vectors[k] = std::move(vec);
  }
  return t;
}

TableEmbeddingProvider::TableEmbeddingProvider(EmbeddingTable table)
    : table_(std::move(table)) {}

std::vector<float> TableEmbeddingProvider::embed(const std::string& description) const {
  auto it = table_.vectors.find(description);
  if (it == table_.vectors.end())
    throw Error("MissingEmbedding", "'" + description + "'");
  return it->second;
}

std::vector<std::vector<float>> embed_all(const std::vector<std::string>& descriptions,
                                          const EmbeddingProvider& provider) {
  std::vector<std::vector<float>> rows;
  rows.reserve(descriptions.size());
  std::string missing;
  for (const auto& d : descriptions) {
    try {
      rows.push_back(provider.embed(d));
    } catch (const Error& e) {
      if (e.kind() == "MissingEmbedding") {
        missing += (missing.empty() ? "" : ", ") + d;
        rows.emplace_back();
      } else {
        throw;
      }
    }
  }
  if (!missing.empty()) throw Error("MissingEmbedding", missing);
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != provider.dimension())
      throw Error("DimensionMismatch", "provider returned wrong embedding width");
  return rows;
}

std::vector<int> contact_joint_set(const bvh::Skeleton& skeleton,
                                   const std::vector<std::string>& descriptions) {
  if (static_cast<int>(descriptions.size()) != skeleton.joint_count())
    throw Error("EmbeddingCountMismatch", "description count != joint count");
  static const std::vector<std::string> tokens = {"foot", "toe", "paw", "hoof", "ankle"};
  std::vector<int> out;
  for (int i = 0; i < skeleton.joint_count(); ++i) {
    std::string low = lower(descriptions[i]);
    for (const auto& t : tokens) {
      if (low.find(t) != std::string::npos) {
        out.push_back(i);
        break;
      }
    }
  }
  if (!out.empty()) return out;

  // Unlabeled skeleton: lowest leaf joints in the rest pose.
  auto children = skeleton.children();
  auto pos = skeleton.rest_global_positions();
  double min_y = std::numeric_limits<double>::max();
  for (int i = 0; i < skeleton.joint_count(); ++i)
    if (children[i].empty()) min_y = std::min(min_y, pos[i].y());
  double tol = 0.01 * std::max(skeleton.rest_height(), 1e-6);
  for (int i = 0; i < skeleton.joint_count(); ++i)
    if (children[i].empty() && pos[i].y() <= min_y + tol) out.push_back(i);
  return out;
}

}  // namespace sata::sem
