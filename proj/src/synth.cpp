#include "sata/synth.hpp"

#include <cmath>

namespace sata::synth {

namespace {

using bvh::Channel;
using bvh::Joint;
using bvh::Skeleton;

const std::vector<Channel> kRootChannels = {Channel::Xpos, Channel::Ypos, Channel::Zpos,
                                            Channel::Zrot, Channel::Xrot, Channel::Yrot};
const std::vector<Channel> kRotChannels = {Channel::Zrot, Channel::Xrot, Channel::Yrot};

struct Builder {
  Skeleton skel;
  double scale;

  explicit Builder(double s) : scale(s) {}

  int joint(const std::string& name, int parent, Eigen::Vector3d offset) {
    Joint j;
    j.name = name;
    j.parent = parent;
    j.rest_offset = offset * scale;
    j.channels = parent < 0 ? kRootChannels : kRotChannels;
    skel.joints.push_back(j);
    return skel.joint_count() - 1;
  }

  void end(int parent, Eigen::Vector3d offset) {
    Joint j;
    j.name = skel.joints[parent].name + "_End";
    j.parent = parent;
    j.rest_offset = offset * scale;
    bvh::EndSite es;
    es.parent = parent;
    es.offset = j.rest_offset;
    es.joint = skel.joint_count();
    skel.joints.push_back(j);
    skel.end_sites.push_back(es);
  }
};

Skeleton make_chain5(double s) {
  Builder b(s);
  int hips = b.joint("Hips", -1, {0, 0.5, 0});
  int spine = b.joint("Spine", hips, {0, 0.15, 0});
  int spine1 = b.joint("Spine1", spine, {0, 0.15, 0});
  int neck = b.joint("Neck", spine1, {0, 0.1, 0});
  b.joint("Head", neck, {0, 0.1, 0});
  return b.skel;
}

// Joints are laid out in depth-first order, matching BVH file order so the
// written hierarchy re-parses with identical indices.
Skeleton make_biped17(double s) {
  Builder b(s);
  int hips = b.joint("Hips", -1, {0, 0.55, 0});
  int spine = b.joint("Spine", hips, {0, 0.12, 0});
  int spine1 = b.joint("Spine1", spine, {0, 0.12, 0});
  int neck = b.joint("Neck", spine1, {0, 0.10, 0});
  int head = b.joint("Head", neck, {0, 0.06, 0});
  b.end(head, {0, 0.10, 0});
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string pre = side == 0 ? "Left" : "Right";
    int arm = b.joint(pre + "Arm", spine1, {sx * 0.12, 0.08, 0});
    int forearm = b.joint(pre + "ForeArm", arm, {sx * 0.20, 0, 0});
    int hand = b.joint(pre + "Hand", forearm, {sx * 0.18, 0, 0});
    b.end(hand, {sx * 0.08, 0, 0});
  }
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string pre = side == 0 ? "Left" : "Right";
    int upleg = b.joint(pre + "UpLeg", hips, {sx * 0.09, -0.03, 0});
    int leg = b.joint(pre + "Leg", upleg, {0, -0.25, 0});
    int foot = b.joint(pre + "Foot", leg, {0, -0.25, 0});
    b.end(foot, {0, -0.02, 0.10});
  }
  return b.skel;
}

Skeleton make_quadruped13(double s) {
  Builder b(s);
  int hips = b.joint("Hips", -1, {0, 0.45, 0});
  int spine = b.joint("Spine", hips, {0, 0.02, 0.18});
  int chest = b.joint("Chest", spine, {0, 0.02, 0.18});
  int head = b.joint("Head", chest, {0, 0.08, 0.15});
  b.end(head, {0, 0.05, 0.10});
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string pre = side == 0 ? "Left" : "Right";
    int fup = b.joint(pre + "FrontUpLeg", chest, {sx * 0.08, -0.05, 0.02});
    int flo = b.joint(pre + "FrontLeg", fup, {0, -0.20, 0});
    b.end(flo, {0, -0.22, 0});
  }
  int tail = b.joint("Tail", hips, {0, 0.02, -0.20});
  b.end(tail, {0, -0.02, -0.15});
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string pre = side == 0 ? "Left" : "Right";
    int hup = b.joint(pre + "HindUpLeg", hips, {sx * 0.08, -0.05, 0});
    int hlo = b.joint(pre + "HindLeg", hup, {0, -0.20, 0});
    b.end(hlo, {0, -0.20, 0});
  }
  return b.skel;
}

}  // namespace

Skeleton make_skeleton(const std::string& preset, double scale) {
  if (preset == "chain5") return make_chain5(scale);
  if (preset == "biped17") return make_biped17(scale);
  if (preset == "quadruped13") return make_quadruped13(scale);
  throw Error("UnknownPreset", "skeleton preset '" + preset + "'");
}

sem::TagDictionary tags_for(const bvh::Skeleton& skeleton, const std::string& preset) {
  const sem::TagDictionary& base =
      preset == "quadruped13" ? sem::TagDictionary::quadruped() : sem::TagDictionary::human();
  sem::TagDictionary out;
  for (const auto& j : skeleton.joints) {
    std::string desc = base.lookup(j.name);
    out.entries[j.name] = desc.empty() ? sem::normalize_joint_name(j.name) : desc;
  }
  return out;
}

SynthResult generate(const SynthSpec& spec) {
  if (spec.frames < 2) throw Error("InvalidConfig", "frames must be >= 2");
  Skeleton skel = make_skeleton(spec.skeleton, spec.scale);
  const bool motion_known = spec.motion == "static" || spec.motion == "sine_wave" ||
                            spec.motion == "walk_cycle" || spec.motion == "turn_in_place";
  if (!motion_known) throw Error("UnknownPreset", "motion preset '" + spec.motion + "'");

  const int J = skel.joint_count();
  const int T = spec.frames;
  const double hips_y = skel.joints[skel.root()].rest_offset.y();
  Rng rng(hash_combine(spec.seed, fnv1a(spec.skeleton + "/" + spec.motion)));
  std::vector<double> phase(J);
  for (auto& p : phase) p = rng.uniform_double() * 2.0 * M_PI;

  bvh::MotionClip clip;
  clip.skeleton = skel;
  clip.frame_time = 1.0 / 30.0;

  const double omega = 2.0 * M_PI / 32.0;  // one gait cycle per 32 frames
  for (int t = 0; t < T; ++t) {
    Eigen::Vector3d root(0, hips_y, 0);
    std::vector<Eigen::Quaterniond> rots(J, Eigen::Quaterniond::Identity());

    if (spec.motion == "sine_wave") {
      for (int j = 0; j < J; ++j) {
        if (skel.joints[j].parent < 0 || skel.is_end_joint(j)) continue;
        rots[j] = Eigen::Quaterniond(
            Eigen::AngleAxisd(0.25 * std::sin(omega * t + phase[j]), Eigen::Vector3d::UnitX()));
      }
    } else if (spec.motion == "walk_cycle") {
      root.z() = 0.05 * t;
      for (int j = 0; j < J; ++j) {
        const std::string& name = skel.joints[j].name;
        double side = name.find("Left") != std::string::npos ? 0.0 : M_PI;
        if (name.find("UpLeg") != std::string::npos) {
          rots[j] = Eigen::Quaterniond(
              Eigen::AngleAxisd(0.45 * std::sin(omega * t + side), Eigen::Vector3d::UnitX()));
        } else if (name.find("Leg") != std::string::npos && !skel.is_end_joint(j)) {
          // knees flex against the thigh swing
          rots[j] = Eigen::Quaterniond(Eigen::AngleAxisd(
              0.35 * std::max(0.0, std::sin(omega * t + side + M_PI / 2)),
              Eigen::Vector3d::UnitX()));
        } else if (name.find("Arm") != std::string::npos && !skel.is_end_joint(j) &&
                   name.find("Fore") == std::string::npos) {
          rots[j] = Eigen::Quaterniond(Eigen::AngleAxisd(
              -0.30 * std::sin(omega * t + side), Eigen::Vector3d::UnitX()));
        }
      }
    } else if (spec.motion == "turn_in_place") {
      rots[skel.root()] = Eigen::Quaterniond(
          Eigen::AngleAxisd(1.5 * M_PI / 180.0 * t, Eigen::Vector3d::UnitY()));
      for (int j = 0; j < J; ++j) {
        if (skel.joints[j].parent < 0 || skel.is_end_joint(j)) continue;
        if (skel.joints[j].name.find("Arm") != std::string::npos)
          rots[j] = Eigen::Quaterniond(Eigen::AngleAxisd(
              0.15 * std::sin(omega * t + phase[j]), Eigen::Vector3d::UnitZ()));
      }
    }
    clip.root_positions.push_back(root);
    clip.rotations.push_back(std::move(rots));
  }
  return {std::move(clip), tags_for(skel, spec.skeleton)};
}

}  // namespace sata::synth
