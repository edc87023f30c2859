#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sata/bvh.hpp"

namespace sata::sem {

// Joint-name key normalization: numeric indices stripped, case folded,
// separators unified; side tokens preserved. Idempotent.
std::string normalize_joint_name(const std::string& raw);

// Map from raw-or-normalized joint name to a functional description.
struct TagDictionary {
  std::map<std::string, std::string> entries;

  // Exact match first, then case-insensitive, then normalized-key match.
  // Returns empty when nothing applies.
  std::string lookup(const std::string& raw_name) const;

  static TagDictionary from_json(const std::string& json_text);
  std::string to_json() const;

  // Shipped defaults for the standard human skeleton and a quadruped
  // template; users extend via tags files.
  static const TagDictionary& human();
  static const TagDictionary& quadruped();
};

// One description per joint. Fallback is the normalized joint name itself,
// with a warning per fallback.
std::vector<std::string> resolve_descriptions(const bvh::Skeleton& skeleton,
                                              const TagDictionary& dict);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dimension() const = 0;
  virtual std::vector<float> embed(const std::string& description) const = 0;
};

// Seeded pseudo-random unit vector per description; bit-identical across
// platforms (no transcendentals on this path).
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(int dimension = 64, uint64_t seed = 0);
  int dimension() const override { return dim_; }
  std::vector<float> embed(const std::string& description) const override;

 private:
  int dim_;
  uint64_t seed_;
};

struct EmbeddingTable {
  int dimension = 0;
  std::map<std::string, std::vector<float>> vectors;

  static EmbeddingTable from_json(const std::string& json_text);
};

class TableEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit TableEmbeddingProvider(EmbeddingTable table);
  int dimension() const override { return table_.dimension; }
  // Exact lookup; throws MissingEmbedding listing every missing description
  // of a batch via embed_all.
  std::vector<float> embed(const std::string& description) const override;

 private:
  EmbeddingTable table_;
};

// J x d_text matrix, one row per description.
std::vector<std::vector<float>> embed_all(const std::vector<std::string>& descriptions,
                                          const EmbeddingProvider& provider);

// Contact-joint selection: joints whose description contains one of
// {foot, toe, paw, hoof, ankle}; when empty, the lowest leaf joints in the
// rest pose.
std::vector<int> contact_joint_set(const bvh::Skeleton& skeleton,
                                   const std::vector<std::string>& descriptions);

}  // namespace sata::sem
