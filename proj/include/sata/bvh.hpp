#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "sata/common.hpp"

namespace sata::bvh {

class BvhError : public Error {
 public:
  BvhError(const std::string& kind, int line, const std::string& what)
      : Error(kind, "line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class Channel { Xpos, Ypos, Zpos, Xrot, Yrot, Zrot };

bool is_rotation(Channel c);

struct Joint {
  std::string name;
  int parent = -1;  // -1 for the root
  Eigen::Vector3d rest_offset = Eigen::Vector3d::Zero();  // meters
  std::vector<Channel> channels;  // empty for end-site leaf nodes
};

struct EndSite {
  int parent = -1;          // index of the owning joint
  int joint = -1;           // index of the materialized "<parent>_End" joint
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

// Joint tree in topological order (parent index < own index). End sites are
// materialized as channel-less leaf joints named "<parent>_End" and also
// listed in end_sites so serialization can emit them as End Site blocks.
struct Skeleton {
  std::vector<Joint> joints;
  std::vector<EndSite> end_sites;

  int joint_count() const { return static_cast<int>(joints.size()); }
  int root() const;
  std::vector<std::vector<int>> children() const;
  int find_joint(const std::string& name) const;  // -1 when absent
  bool is_end_joint(int i) const;

  // Global joint positions with all local rotations at identity, root at the
  // origin.
  std::vector<Eigen::Vector3d> rest_global_positions() const;
  // Vertical (Y) extent of the rest pose.
  double rest_height() const;
};

struct MotionClip {
  Skeleton skeleton;
  double frame_time = 1.0 / 30.0;                  // seconds
  std::vector<Eigen::Vector3d> root_positions;     // T, meters
  std::vector<std::vector<Eigen::Quaterniond>> rotations;  // T x J, unit (w,x,y,z)

  int frame_count() const { return static_cast<int>(root_positions.size()); }
  void validate() const;  // unit-norm and dimension invariants
};

enum class UnitPolicy { Auto, Meters, Centimeters };

// Parses a complete BVH document. Channel values are converted to meters and
// unit quaternions; Euler channels are composed in the file-declared order.
// With UnitPolicy::Auto, translations are treated as centimeters when the
// rest-pose height exceeds 10 (a warning is emitted), else meters.
std::pair<Skeleton, MotionClip> parse_bvh(const std::string& text,
                                          UnitPolicy units = UnitPolicy::Auto);

// Serializes back to BVH text. Rotation channels are emitted in ZXY order and
// floats with 6 decimal places; the gimbal-safe Euler extraction picks the
// solution continuous with the previous frame. LF line endings.
std::string write_bvh(const Skeleton& skeleton, const MotionClip& clip);

}  // namespace sata::bvh
