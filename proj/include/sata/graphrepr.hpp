#pragma once

#include <array>
#include <string>
#include <vector>

#include "sata/kinematics.hpp"

namespace sata::repr {

using bvh::MotionClip;
using bvh::Skeleton;

// Dynamic per-joint row layout: q(6) x(3) v_q(6) v_x(3) r(4) c(1).
constexpr int kDynWidth = 23;
constexpr int kQOff = 0;
constexpr int kXOff = 6;
constexpr int kVqOff = 9;
constexpr int kVxOff = 15;
constexpr int kROff = 18;
constexpr int kCOff = 22;

// Decoder output layout: q(6) r(4) c(1).
constexpr int kOutWidth = 11;

struct EdgeInfo {
  int parent = -1;
  int child = -1;
  int depth = 0;          // hops from root to the child joint
  int reverse_depth = 0;  // longest hop count from the child down to any leaf
};

struct StaticFeatures {
  std::vector<std::array<float, 3>> x_global;  // rest offsets w.r.t. root
  std::vector<std::array<float, 3>> x_local;   // rest offsets w.r.t. parent
  std::vector<std::vector<float>> x_text;      // semantic embeddings
};

struct MotionGraphSequence {
  int joint_count = 0;
  std::vector<int> parents;  // -1 for root; topological order
  std::vector<EdgeInfo> edges;
  StaticFeatures statics;
  std::vector<std::vector<float>> frames;  // T rows of J*23 floats
  double frame_time = 1.0 / 30.0;
  std::vector<int> contact_joints;

  int frame_count() const { return static_cast<int>(frames.size()); }
  float dyn(int t, int j, int k) const { return frames[t][j * kDynWidth + k]; }
  int root() const;
};

// Edge list with depth features plus static node features.
std::pair<std::vector<EdgeInfo>, StaticFeatures> build_static(
    const Skeleton& skeleton, const std::vector<std::vector<float>>& embeddings);

// Dynamic features of a canonicalized clip; statics.x_text is left empty.
MotionGraphSequence extract_dynamics(const MotionClip& clip,
                                     const std::vector<int>& contact_joints);

// build_static + extract_dynamics in one pass.
MotionGraphSequence build_sequence(const MotionClip& clip,
                                   const std::vector<std::vector<float>>& embeddings,
                                   const std::vector<int>& contact_joints);

// Contact flags from joint height above the estimated ground level and
// per-frame speed. Ground level is the 2nd percentile of contact-joint
// heights over the clip; thresholds scale with character height.
std::vector<std::vector<uint8_t>> derive_contacts(
    const std::vector<std::vector<Eigen::Vector3d>>& global_positions,
    double frame_time, const std::vector<int>& contact_joints, double character_height);

struct RecoveredMotion {
  MotionClip clip;
  std::vector<std::vector<float>> contacts;  // T x J channel values
  int degenerate_sixd_count = 0;
};

// Inverse of the representation: rotations via Gram-Schmidt, root trajectory
// by integrating the root-row r channels. Frame-0 velocity entries are the
// integration origin and are ignored.
RecoveredMotion recover_motion(const std::vector<std::vector<float>>& outputs,
                               const Skeleton& target_skeleton, double frame_time);

// Versioned little-endian float32 cache.
std::vector<uint8_t> serialize_sequence(const MotionGraphSequence& seq);
MotionGraphSequence deserialize_sequence(const std::vector<uint8_t>& bytes);

}  // namespace sata::repr
