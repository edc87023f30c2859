#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "sata/bvh.hpp"

namespace sata::kin {

using bvh::MotionClip;
using bvh::Skeleton;

// First two columns of a rotation matrix; the continuous 6D parameterization.
struct SixD {
  Eigen::Vector3d a;
  Eigen::Vector3d b;
};

SixD quat_to_sixd(const Eigen::Quaterniond& q);

// Gram-Schmidt reconstruction; the returned quaternion has w >= 0. Throws
// DegenerateSixD when the columns are near-zero or near-parallel (eps 1e-8).
Eigen::Quaterniond sixd_to_quat(const SixD& s);

// Geodesic angle between two rotations, invariant to the double cover.
double geodesic_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

std::vector<Eigen::Vector3d> forward_kinematics(
    const Skeleton& skeleton, const std::vector<Eigen::Quaterniond>& rotations,
    const Eigen::Vector3d& root_pos);

// Global joint positions for every frame of a clip.
std::vector<std::vector<Eigen::Vector3d>> global_positions(const MotionClip& clip);

// Yaw-only facing angle of a root orientation: the root's local +Z axis
// projected to the ground plane (fallback +Y when degenerate), measured as a
// rotation about +Y away from world +Z. Returns false when both axes
// degenerate (caller skips the rotation).
bool facing_yaw(const Eigen::Quaterniond& root_rotation, double* yaw_out);

// Translates frame-0 root XZ to the origin and applies a single Y rotation so
// the frame-0 facing aligns with +Z. Root height is preserved.
MotionClip canonicalize(const MotionClip& clip);

// Left/right joint-name pairing used by mirroring. Rules are matched
// case-insensitively as prefix/suffix/in-fix tokens.
struct SideRule {
  std::string left;
  std::string right;
};

std::vector<SideRule> default_side_rules();

// Counterpart name under the side rules; empty when the name carries no side
// token.
std::string mirrored_name(const std::string& name, const std::vector<SideRule>& rules);

// Reflects the motion across the YZ plane, swapping left/right joint channels.
MotionClip mirror(const MotionClip& clip,
                  const std::vector<SideRule>& rules = default_side_rules());

}  // namespace sata::kin
