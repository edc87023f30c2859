#include "sata/graphrepr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sata::repr {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

int MotionGraphSequence::root() const {
  for (int i = 0; i < joint_count; ++i)
    if (parents[i] < 0) return i;
  return -1;
}

std::pair<std::vector<EdgeInfo>, StaticFeatures> build_static(
    const Skeleton& skeleton, const std::vector<std::vector<float>>& embeddings) {
  const int J = skeleton.joint_count();
  if (static_cast<int>(embeddings.size()) != J)
    throw Error("EmbeddingCountMismatch",
                std::to_string(embeddings.size()) + " embeddings for " + std::to_string(J) +
                    " joints");

  std::vector<int> depth(J, 0);
  for (int i = 0; i < J; ++i) {
    int p = skeleton.joints[i].parent;
    depth[i] = p < 0 ? 0 : depth[p] + 1;
  }
  // Longest path to a leaf, by reverse topological sweep.
  std::vector<int> rdepth(J, 0);
  for (int i = J - 1; i >= 0; --i) {
    int p = skeleton.joints[i].parent;
    if (p >= 0) rdepth[p] = std::max(rdepth[p], rdepth[i] + 1);
  }

  std::vector<EdgeInfo> edges;
  for (int i = 0; i < J; ++i) {
    int p = skeleton.joints[i].parent;
    if (p < 0) continue;
    edges.push_back({p, i, depth[i], rdepth[i]});
  }

  StaticFeatures st;
  st.x_global.resize(J);
  st.x_local.resize(J);
  st.x_text = embeddings;
  auto rest = skeleton.rest_global_positions();
  int root = skeleton.root();
  for (int i = 0; i < J; ++i) {
    Eigen::Vector3d g = rest[i] - rest[root];
    Eigen::Vector3d l =
        skeleton.joints[i].parent < 0 ? Eigen::Vector3d::Zero() : skeleton.joints[i].rest_offset;
    for (int d = 0; d < 3; ++d) {
      st.x_global[i][d] = static_cast<float>(g(d));
      st.x_local[i][d] = static_cast<float>(l(d));
    }
  }
  return {std::move(edges), std::move(st)};
}

std::vector<std::vector<uint8_t>> derive_contacts(
    const std::vector<std::vector<Eigen::Vector3d>>& global_positions,
    double /*frame_time*/, const std::vector<int>& contact_joints,
    double character_height) {
  const int T = static_cast<int>(global_positions.size());
  const int J = T > 0 ? static_cast<int>(global_positions[0].size()) : 0;
  std::vector<std::vector<uint8_t>> flags(T, std::vector<uint8_t>(J, 0));
  if (contact_joints.empty()) {
    warn("EmptyContactSet: no contact joints; contacts left all-zero");
    return flags;
  }

  std::vector<double> heights;
  heights.reserve(static_cast<size_t>(T) * contact_joints.size());
  for (int t = 0; t < T; ++t)
    for (int j : contact_joints) heights.push_back(global_positions[t][j].y());
  std::sort(heights.begin(), heights.end());
  double ground = heights[static_cast<size_t>(0.02 * (heights.size() - 1))];

  const double h_th = 0.05 * character_height;
  const double v_th = 0.01 * character_height;  // meters per frame

  for (int j : contact_joints) {
    for (int t = 0; t < T; ++t) {
      int ts = t > 0 ? t : std::min(1, T - 1);
      double speed =
          ts > 0 ? (global_positions[ts][j] - global_positions[ts - 1][j]).norm() : 0.0;
      double height = global_positions[t][j].y() - ground;
      if (height < h_th && speed < v_th) flags[t][j] = 1;
    }
  }
  return flags;
}

MotionGraphSequence extract_dynamics(const MotionClip& clip,
                                     const std::vector<int>& contact_joints) {
  const Skeleton& skel = clip.skeleton;
  const int J = skel.joint_count();
  const int T = clip.frame_count();
  const int root = skel.root();

  MotionGraphSequence seq;
  seq.joint_count = J;
  seq.frame_time = clip.frame_time;
  seq.contact_joints = contact_joints;
  seq.parents.resize(J);
  for (int i = 0; i < J; ++i) seq.parents[i] = skel.joints[i].parent;
  {
    std::vector<std::vector<float>> dummy(J);  // depths only; x_text filled by caller
    for (auto& e : dummy) e = {};
    auto [edges, st] = build_static(skel, dummy);
    seq.edges = std::move(edges);
    seq.statics = std::move(st);
    seq.statics.x_text.clear();
  }

  auto positions = kin::global_positions(clip);
  auto contacts = derive_contacts(positions, clip.frame_time, contact_joints,
                                  skel.rest_height());

  // Per-frame yaw of the root facing.
  std::vector<double> yaw(T, 0.0);
  for (int t = 0; t < T; ++t) {
    double y = 0.0;
    if (kin::facing_yaw(clip.rotations[t][root], &y)) yaw[t] = y;
    else yaw[t] = t > 0 ? yaw[t - 1] : 0.0;
  }

  // Global rotations (needed for the parent-relative x feature).
  std::vector<std::vector<Eigen::Quaterniond>> global_rot(
      T, std::vector<Eigen::Quaterniond>(J));
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < J; ++i) {
      int p = skel.joints[i].parent;
      global_rot[t][i] =
          p < 0 ? clip.rotations[t][i] : global_rot[t][p] * clip.rotations[t][i];
    }

  seq.frames.assign(T, std::vector<float>(J * kDynWidth, 0.0f));
  std::vector<std::vector<float>> x_prev(T);  // x features, for velocities
  for (int t = 0; t < T; ++t) {
    auto& row = seq.frames[t];
    Eigen::Quaterniond facing_inv(
        Eigen::AngleAxisd(-yaw[t], Eigen::Vector3d::UnitY()));

    // r channels (computed once, broadcast to every row).
    float r[4] = {0, 0, 0, 0};
    if (t > 0) {
      r[0] = static_cast<float>(wrap_angle(yaw[t] - yaw[t - 1]));
      Eigen::Vector3d dp = clip.root_positions[t] - clip.root_positions[t - 1];
      Eigen::Quaterniond prev_inv(
          Eigen::AngleAxisd(-yaw[t - 1], Eigen::Vector3d::UnitY()));
      Eigen::Vector3d local = prev_inv * dp;
      r[1] = static_cast<float>(local.x());
      r[2] = static_cast<float>(local.z());
    }
    r[3] = static_cast<float>(clip.root_positions[t].y());

    for (int i = 0; i < J; ++i) {
      float* d = &row[i * kDynWidth];
      kin::SixD s = kin::quat_to_sixd(clip.rotations[t][i]);
      for (int k = 0; k < 3; ++k) {
        d[kQOff + k] = static_cast<float>(s.a(k));
        d[kQOff + 3 + k] = static_cast<float>(s.b(k));
      }
      int p = skel.joints[i].parent;
      Eigen::Vector3d x = Eigen::Vector3d::Zero();
      if (p >= 0) x = facing_inv * (global_rot[t][p] * skel.joints[i].rest_offset);
      for (int k = 0; k < 3; ++k) d[kXOff + k] = static_cast<float>(x(k));
      for (int k = 0; k < 4; ++k) d[kROff + k] = r[k];
      d[kCOff] = contacts[t][i] ? 1.0f : 0.0f;
    }

    // Backward-difference velocities with v(0) = 0.
    if (t > 0) {
      const auto& prev = seq.frames[t - 1];
      for (int i = 0; i < J; ++i) {
        float* d = &row[i * kDynWidth];
        const float* q0 = &prev[i * kDynWidth];
        for (int k = 0; k < 6; ++k) d[kVqOff + k] = d[kQOff + k] - q0[kQOff + k];
        for (int k = 0; k < 3; ++k) d[kVxOff + k] = d[kXOff + k] - q0[kXOff + k];
      }
    }
  }
  return seq;
}

MotionGraphSequence build_sequence(const MotionClip& clip,
                                   const std::vector<std::vector<float>>& embeddings,
                                   const std::vector<int>& contact_joints) {
  MotionGraphSequence seq = extract_dynamics(clip, contact_joints);
  auto [edges, st] = build_static(clip.skeleton, embeddings);
  seq.edges = std::move(edges);
  seq.statics = std::move(st);
  return seq;
}

RecoveredMotion recover_motion(const std::vector<std::vector<float>>& outputs,
                               const Skeleton& target_skeleton, double frame_time) {
  const int J = target_skeleton.joint_count();
  const int T = static_cast<int>(outputs.size());
  if (T < 1) throw Error("DimensionMismatch", "no output frames");
  for (const auto& row : outputs)
    if (static_cast<int>(row.size()) != J * kOutWidth)
      throw Error("DimensionMismatch", "output row width != J*11");
  const int root = target_skeleton.root();

  RecoveredMotion out;
  out.clip.skeleton = target_skeleton;
  out.clip.frame_time = frame_time;
  out.contacts.assign(T, std::vector<float>(J, 0.0f));

  double yaw = 0.0;
  Eigen::Vector3d pos(0, 0, 0);
  for (int t = 0; t < T; ++t) {
    const float* rowr = &outputs[t][root * kOutWidth];
    if (t > 0) {
      double prev_yaw = yaw;
      yaw += rowr[6];
      Eigen::Vector3d v(rowr[7], 0.0, rowr[8]);
      pos += Eigen::AngleAxisd(prev_yaw, Eigen::Vector3d::UnitY()) * v;
    }
    pos.y() = rowr[9];
    out.clip.root_positions.push_back(pos);

    std::vector<Eigen::Quaterniond> rots(J);
    for (int i = 0; i < J; ++i) {
      const float* d = &outputs[t][i * kOutWidth];
      kin::SixD s;
      s.a = Eigen::Vector3d(d[0], d[1], d[2]);
      s.b = Eigen::Vector3d(d[3], d[4], d[5]);
      try {
        rots[i] = kin::sixd_to_quat(s);
      } catch (const Error& e) {
        if (e.kind() != "DegenerateSixD") throw;
        rots[i] = Eigen::Quaterniond::Identity();
        ++out.degenerate_sixd_count;
      }
      out.contacts[t][i] = d[10];
    }
    out.clip.rotations.push_back(std::move(rots));
  }
  if (out.degenerate_sixd_count > 0)
    warn("recover_motion: substituted identity for " +
         std::to_string(out.degenerate_sixd_count) + " degenerate 6D rotations");
  return out;
}

namespace {

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  buf.push_back(v & 0xff);
  buf.push_back((v >> 8) & 0xff);
  buf.push_back((v >> 16) & 0xff);
  buf.push_back((v >> 24) & 0xff);
}

void put_i32(std::vector<uint8_t>& buf, int32_t v) { put_u32(buf, static_cast<uint32_t>(v)); }

void put_f32(std::vector<uint8_t>& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  uint32_t u32() {
    if (pos + 4 > buf.size()) throw Error("ConfigError", "truncated sequence cache");
    uint32_t v = buf[pos] | (buf[pos + 1] << 8) | (buf[pos + 2] << 16) |
                 (static_cast<uint32_t>(buf[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

constexpr uint32_t kCacheMagic = 0x47544153;  // "SATG" little-endian
constexpr uint32_t kCacheVersion = 1;

}  // namespace

std::vector<uint8_t> serialize_sequence(const MotionGraphSequence& seq) {
  std::vector<uint8_t> buf;
  put_u32(buf, kCacheMagic);
  put_u32(buf, kCacheVersion);
  const int J = seq.joint_count;
  const int T = seq.frame_count();
  const int E = static_cast<int>(seq.edges.size());
  const int d_text = seq.statics.x_text.empty() ? 0 : static_cast<int>(seq.statics.x_text[0].size());
  put_u32(buf, J);
  put_u32(buf, T);
  put_u32(buf, E);
  put_u32(buf, d_text);
  put_f32(buf, static_cast<float>(seq.frame_time));
  put_u32(buf, static_cast<uint32_t>(seq.contact_joints.size()));
  for (int i = 0; i < J; ++i) put_i32(buf, seq.parents[i]);
  for (const auto& e : seq.edges) {
    put_u32(buf, e.parent);
    put_u32(buf, e.child);
    put_i32(buf, e.depth);
    put_i32(buf, e.reverse_depth);
  }
  for (int i = 0; i < J; ++i)
    for (int d = 0; d < 3; ++d) put_f32(buf, seq.statics.x_global[i][d]);
  for (int i = 0; i < J; ++i)
    for (int d = 0; d < 3; ++d) put_f32(buf, seq.statics.x_local[i][d]);
  for (int i = 0; i < J && d_text > 0; ++i)
    for (int d = 0; d < d_text; ++d) put_f32(buf, seq.statics.x_text[i][d]);
  for (int j : seq.contact_joints) put_u32(buf, j);
  for (int t = 0; t < T; ++t)
    for (float v : seq.frames[t]) put_f32(buf, v);
  return buf;
}

MotionGraphSequence deserialize_sequence(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  if (r.u32() != kCacheMagic) throw Error("ConfigError", "bad sequence cache magic");
  if (r.u32() != kCacheVersion) throw Error("ConfigError", "unsupported cache version");
  MotionGraphSequence seq;
  seq.joint_count = r.u32();
  const int T = r.u32();
  const int E = r.u32();
  const int d_text = r.u32();
  seq.frame_time = r.f32();
  const int n_contact = r.u32();
  seq.parents.resize(seq.joint_count);
  for (auto& p : seq.parents) p = r.i32();
  seq.edges.resize(E);
  for (auto& e : seq.edges) {
    e.parent = r.u32();
    e.child = r.u32();
    e.depth = r.i32();
    e.reverse_depth = r.i32();
  }
  seq.statics.x_global.resize(seq.joint_count);
  seq.statics.x_local.resize(seq.joint_count);
  for (auto& v : seq.statics.x_global)
    for (int d = 0; d < 3; ++d) v[d] = r.f32();
  for (auto& v : seq.statics.x_local)
    for (int d = 0; d < 3; ++d) v[d] = r.f32();
  if (d_text > 0) {
    seq.statics.x_text.resize(seq.joint_count);
    for (auto& v : seq.statics.x_text) {
      v.resize(d_text);
      for (auto& x : v) x = r.f32();
    }
  }
  seq.contact_joints.resize(n_contact);
  for (auto& j : seq.contact_joints) j = r.u32();
  seq.frames.assign(T, std::vector<float>(seq.joint_count * kDynWidth));
  for (auto& row : seq.frames)
    for (auto& v : row) v = r.f32();
  if (r.pos != bytes.size()) throw Error("ConfigError", "trailing bytes in sequence cache");
  return seq;
}

}  // namespace sata::repr
