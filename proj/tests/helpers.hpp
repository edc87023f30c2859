#pragma once

#include <string>
#include <vector>

#include "sata/bvh.hpp"
#include "sata/kinematics.hpp"

namespace sata::test {

inline bvh::Skeleton make_chain(const std::vector<Eigen::Vector3d>& offsets,
                                const std::string& prefix = "j") {
  bvh::Skeleton s;
  for (size_t i = 0; i < offsets.size(); ++i) {
    bvh::Joint j;
    j.name = prefix + std::to_string(i);
    j.parent = static_cast<int>(i) - 1;
    j.rest_offset = offsets[i];
    if (i == 0)
      j.channels = {bvh::Channel::Xpos, bvh::Channel::Ypos, bvh::Channel::Zpos,
                    bvh::Channel::Zrot, bvh::Channel::Xrot, bvh::Channel::Yrot};
    else
      j.channels = {bvh::Channel::Zrot, bvh::Channel::Xrot, bvh::Channel::Yrot};
    s.joints.push_back(j);
  }
  return s;
}

// Root + symmetric left/right arms, for mirror tests.
inline bvh::Skeleton make_sided() {
  bvh::Skeleton s = make_chain({{0, 1, 0}}, "Hips");
  s.joints[0].name = "Hips";
  auto add = [&](const std::string& name, int parent, Eigen::Vector3d off) {
    bvh::Joint j;
    j.name = name;
    j.parent = parent;
    j.rest_offset = off;
    j.channels = {bvh::Channel::Zrot, bvh::Channel::Xrot, bvh::Channel::Yrot};
    s.joints.push_back(j);
    return static_cast<int>(s.joints.size()) - 1;
  };
  int spine = add("Spine", 0, {0, 0.3, 0});
  int larm = add("LeftArm", spine, {0.2, 0, 0});
  add("LeftHand", larm, {0.3, 0, 0});
  int rarm = add("RightArm", spine, {-0.2, 0, 0});
  add("RightHand", rarm, {-0.3, 0, 0});
  return s;
}

inline bvh::MotionClip identity_clip(const bvh::Skeleton& s, int frames,
                                     double frame_time = 1.0 / 30.0) {
  bvh::MotionClip c;
  c.skeleton = s;
  c.frame_time = frame_time;
  for (int t = 0; t < frames; ++t) {
    c.root_positions.emplace_back(0, 0, 0);
    c.rotations.emplace_back(s.joint_count(), Eigen::Quaterniond::Identity());
  }
  return c;
}

inline Eigen::Quaterniond yrot(double rad) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitY()));
}
inline Eigen::Quaterniond zrot(double rad) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitZ()));
}
inline Eigen::Quaterniond xrot(double rad) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitX()));
}

inline Eigen::Quaterniond random_unit_quat(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q;
}

// Max positional deviation between two clips' global joint positions.
inline double max_position_error(const bvh::MotionClip& a, const bvh::MotionClip& b) {
  auto pa = kin::global_positions(a);
  auto pb = kin::global_positions(b);
  double err = 0.0;
  for (size_t t = 0; t < pa.size(); ++t)
    for (size_t j = 0; j < pa[t].size(); ++j)
      err = std::max(err, (pa[t][j] - pb[t][j]).norm());
  return err;
}

}  // namespace sata::test
