#include "sata/kinematics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace sata::kin {

SixD quat_to_sixd(const Eigen::Quaterniond& q) {
  if (std::abs(q.norm() - 1.0) > 1e-6)
    throw Error("NonUnitQuaternion", "quaternion norm deviates from 1 by more than 1e-6");
  Eigen::Matrix3d R = q.toRotationMatrix();
  return {R.col(0), R.col(1)};
}

Eigen::Quaterniond sixd_to_quat(const SixD& s) {
  constexpr double eps = 1e-8;
  double na = s.a.norm();
  if (na <= eps) throw Error("DegenerateSixD", "first column norm below eps");
  Eigen::Vector3d c1 = s.a / na;
  Eigen::Vector3d b_orth = s.b - c1.dot(s.b) * c1;
  double nb = b_orth.norm();
  if (nb <= eps) throw Error("DegenerateSixD", "columns parallel within eps");
  Eigen::Vector3d c2 = b_orth / nb;
  Eigen::Vector3d c3 = c1.cross(c2);
  Eigen::Matrix3d R;
  R.col(0) = c1;
  R.col(1) = c2;
  R.col(2) = c3;
  Eigen::Quaterniond q(R);
  if (q.w() < 0) q.coeffs() *= -1.0;
  return q;
}

double geodesic_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

std::vector<Eigen::Vector3d> forward_kinematics(
    const Skeleton& skeleton, const std::vector<Eigen::Quaterniond>& rotations,
    const Eigen::Vector3d& root_pos) {
  const int J = skeleton.joint_count();
  if (static_cast<int>(rotations.size()) != J)
    throw Error("DimensionMismatch", "rotation count != joint count");
  std::vector<Eigen::Vector3d> pos(J);
  std::vector<Eigen::Quaterniond> global(J);
  for (int i = 0; i < J; ++i) {
    int p = skeleton.joints[i].parent;
    if (p < 0) {
      pos[i] = root_pos;
      global[i] = rotations[i];
    } else {
      pos[i] = pos[p] + global[p] * skeleton.joints[i].rest_offset;
      global[i] = global[p] * rotations[i];
    }
  }
  return pos;
}

std::vector<std::vector<Eigen::Vector3d>> global_positions(const MotionClip& clip) {
  std::vector<std::vector<Eigen::Vector3d>> out;
  out.reserve(clip.frame_count());
  for (int f = 0; f < clip.frame_count(); ++f)
    out.push_back(
        forward_kinematics(clip.skeleton, clip.rotations[f], clip.root_positions[f]));
  return out;
}

bool facing_yaw(const Eigen::Quaterniond& root_rotation, double* yaw_out) {
  Eigen::Vector3d f = root_rotation * Eigen::Vector3d::UnitZ();
  f.y() = 0.0;
  if (f.norm() < 1e-4) {
    f = root_rotation * Eigen::Vector3d::UnitY();
    f.y() = 0.0;
  }
  if (f.norm() < 1e-4) return false;
  *yaw_out = std::atan2(f.x(), f.z());
  return true;
}

MotionClip canonicalize(const MotionClip& clip) {
  if (clip.frame_count() < 1) throw Error("DimensionMismatch", "clip has no frames");
  MotionClip out = clip;
  const int root = clip.skeleton.root();

  Eigen::Vector3d t0 = clip.root_positions[0];
  t0.y() = 0.0;

  double yaw = 0.0;
  if (!facing_yaw(clip.rotations[0][root], &yaw)) {
    warn("canonicalize: frame-0 facing is degenerate; skipping Y alignment");
    yaw = 0.0;
  }
  Eigen::Quaterniond undo(Eigen::AngleAxisd(-yaw, Eigen::Vector3d::UnitY()));

  for (int f = 0; f < clip.frame_count(); ++f) {
    out.root_positions[f] = undo * (clip.root_positions[f] - t0);
    Eigen::Quaterniond q = undo * clip.rotations[f][root];
    if (q.w() < 0) q.coeffs() *= -1.0;
    out.rotations[f][root] = q;
  }
  return out;
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::vector<SideRule> default_side_rules() {
  return {{"left", "right"}, {"l_", "r_"}, {"_l", "_r"}};
}

namespace {

// "left/right" may occur anywhere; "l_/r_" only as a prefix; "_l/_r" only as
// a suffix or followed by a separator/digit. Avoids false hits like the "_l"
// in "hips_lower".
bool rule_matches(const std::string& low, const std::string& token, size_t at) {
  if (token.size() >= 3) return true;
  if (token.back() == '_') return at == 0;
  size_t end = at + token.size();
  if (end == low.size()) return true;
  char next = low[end];
  return next == '_' || (next >= '0' && next <= '9');
}

}  // namespace

std::string mirrored_name(const std::string& name, const std::vector<SideRule>& rules) {
  std::string low = lower(name);
  for (const auto& rule : rules) {
    for (bool flip : {false, true}) {
      const std::string& from = flip ? rule.right : rule.left;
      const std::string& to = flip ? rule.left : rule.right;
      for (size_t at = low.find(from); at != std::string::npos;
           at = low.find(from, at + 1)) {
        if (!rule_matches(low, from, at)) continue;
        // Preserve the original casing of the first letter.
        std::string repl = to;
        if (std::isupper(static_cast<unsigned char>(name[at])))
          repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
        std::string out = name;
        out.replace(at, from.size(), repl);
        return out;
      }
    }
  }
  return "";
}

MotionClip mirror(const MotionClip& clip, const std::vector<SideRule>& rules) {
  const Skeleton& skel = clip.skeleton;
  const int J = skel.joint_count();

  // swap[i] = counterpart joint (self for non-side joints).
  std::vector<int> swap(J);
  std::vector<std::string> unmatched;
  for (int i = 0; i < J; ++i) {
    std::string other = mirrored_name(skel.joints[i].name, rules);
    if (other.empty()) {
      swap[i] = i;
    } else {
      int j = skel.find_joint(other);
      if (j < 0) {
        unmatched.push_back(skel.joints[i].name);
        swap[i] = i;
      } else {
        swap[i] = j;
      }
    }
  }
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& n : unmatched) list += (list.empty() ? "" : ", ") + n;
    throw Error("UnpairedSideJoint", list);
  }

  MotionClip out = clip;
  for (int f = 0; f < clip.frame_count(); ++f) {
    out.root_positions[f].x() = -clip.root_positions[f].x();
    for (int i = 0; i < J; ++i) {
      Eigen::Quaterniond q = clip.rotations[f][swap[i]];
      // Conjugation by the YZ-plane reflection: (w,x,y,z) -> (w,x,-y,-z).
      out.rotations[f][i] = Eigen::Quaterniond(q.w(), q.x(), -q.y(), -q.z());
    }
  }
  return out;
}

}  // namespace sata::kin
