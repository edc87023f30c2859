#pragma once

#include "sata/kinematics.hpp"
#include "sata/semantics.hpp"

namespace sata::synth {

// Deterministic synthetic skeletons and motions; the desk-scale stand-in for
// real capture corpora so tests are self-contained.
struct SynthSpec {
  std::string skeleton = "biped17";     // chain5 | biped17 | quadruped13
  std::string motion = "walk_cycle";    // static | sine_wave | walk_cycle | turn_in_place
  int frames = 64;
  uint64_t seed = 0;
  double scale = 1.0;  // uniform skeleton scaling
};

struct SynthResult {
  bvh::MotionClip clip;
  sem::TagDictionary tags;
};

bvh::Skeleton make_skeleton(const std::string& preset, double scale = 1.0);
sem::TagDictionary tags_for(const bvh::Skeleton& skeleton, const std::string& preset);

SynthResult generate(const SynthSpec& spec);

}  // namespace sata::synth
