#include "sata/bvh.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace sata::bvh {

namespace {

struct Token {
  std::string text;
  int line;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::string cur;
  int line = 1;
  int tok_line = 1;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back({cur, tok_line});
      cur.clear();
    }
  };
  for (char c : text) {
    if (c == '\n') {
      flush();
      ++line;
    } else if (c == '\r' || c == ' ' || c == '\t' || c == '\f' || c == '\v') {
      flush();
    } else {
      if (cur.empty()) tok_line = line;
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

class Cursor {
 public:
  explicit Cursor(std::vector<Token> toks) : toks_(std::move(toks)) {}

  bool done() const { return pos_ >= toks_.size(); }
  int line() const {
    if (pos_ < toks_.size()) return toks_[pos_].line;
    return toks_.empty() ? 1 : toks_.back().line;
  }
  const std::string& peek() const {
    static const std::string empty;
    return done() ? empty : toks_[pos_].text;
  }
  std::string take() {
    if (done()) throw BvhError("Syntax", line(), "unexpected end of file");
    return toks_[pos_++].text;
  }
  void expect(const std::string& tok) {
    int ln = line();
    std::string got = take();
    if (got != tok)
      throw BvhError("Syntax", ln, "expected '" + tok + "', got '" + got + "'");
  }
  double take_number(const char* what) {
    int ln = line();
    std::string tok = take();
    try {
      size_t used = 0;
      double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw BvhError("Syntax", ln, std::string("expected ") + what + ", got '" + tok + "'");
    }
  }
  size_t save() const { return pos_; }
  void restore(size_t p) { pos_ = p; }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
};

std::optional<Channel> channel_from_token(const std::string& t) {
  if (t == "Xposition") return Channel::Xpos;
  if (t == "Yposition") return Channel::Ypos;
  if (t == "Zposition") return Channel::Zpos;
  if (t == "Xrotation") return Channel::Xrot;
  if (t == "Yrotation") return Channel::Yrot;
  if (t == "Zrotation") return Channel::Zrot;
  return std::nullopt;
}

const char* channel_token(Channel c) {
  switch (c) {
    case Channel::Xpos: return "Xposition";
    case Channel::Ypos: return "Yposition";
    case Channel::Zpos: return "Zposition";
    case Channel::Xrot: return "Xrotation";
    case Channel::Yrot: return "Yrotation";
    case Channel::Zrot: return "Zrotation";
  }
  return "";
}

Eigen::Vector3d channel_axis(Channel c) {
  switch (c) {
    case Channel::Xrot: return Eigen::Vector3d::UnitX();
    case Channel::Yrot: return Eigen::Vector3d::UnitY();
    case Channel::Zrot: return Eigen::Vector3d::UnitZ();
    default: return Eigen::Vector3d::Zero();
  }
}

struct ParserState {
  Skeleton skel;
  std::vector<int> brace_lines;  // open-brace lines for diagnostics
};

void parse_offset(Cursor& cur, Eigen::Vector3d* out) {
  cur.expect("OFFSET");
  (*out)(0) = cur.take_number("offset value");
  (*out)(1) = cur.take_number("offset value");
  (*out)(2) = cur.take_number("offset value");
}

void parse_joint(Cursor& cur, ParserState& st, int parent);

void parse_joint_body(Cursor& cur, ParserState& st, int joint_index) {
  int open_line = cur.line();
  cur.expect("{");
  st.brace_lines.push_back(open_line);
  parse_offset(cur, &st.skel.joints[joint_index].rest_offset);

  cur.expect("CHANNELS");
  int n = static_cast<int>(cur.take_number("channel count"));
  for (int i = 0; i < n; ++i) {
    int ln = cur.line();
    std::string tok = cur.take();
    auto ch = channel_from_token(tok);
    if (!ch) throw BvhError("UnknownChannel", ln, "'" + tok + "'");
    st.skel.joints[joint_index].channels.push_back(*ch);
  }

  bool has_child = false;
  while (true) {
    if (cur.done())
      throw BvhError("UnbalancedBraces", cur.line(),
                     "unclosed '{' opened at line " + std::to_string(st.brace_lines.back()));
    if (cur.peek() == "}") {
      int ln = cur.line();
      cur.take();
      if (st.brace_lines.empty()) throw BvhError("UnbalancedBraces", ln, "unmatched '}'");
      st.brace_lines.pop_back();
      if (!has_child && st.skel.joints[joint_index].channels.empty()) {
        // channel-less leaf can only come from End Site materialization
      }
      return;
    }
    if (cur.peek() == "JOINT") {
      cur.take();
      has_child = true;
      parse_joint(cur, st, joint_index);
    } else if (cur.peek() == "End") {
      cur.take();
      cur.expect("Site");
      has_child = true;
      int end_open = cur.line();
      cur.expect("{");
      st.brace_lines.push_back(end_open);
      EndSite es;
      es.parent = joint_index;
      parse_offset(cur, &es.offset);
      int close_ln = cur.line();
      cur.expect("}");
      if (st.brace_lines.empty()) throw BvhError("UnbalancedBraces", close_ln, "unmatched '}'");
      st.brace_lines.pop_back();
      Joint leaf;
      leaf.name = st.skel.joints[joint_index].name + "_End";
      leaf.parent = joint_index;
      leaf.rest_offset = es.offset;
      es.joint = st.skel.joint_count();
      st.skel.joints.push_back(leaf);
      st.skel.end_sites.push_back(es);
    } else if (cur.peek() == "MOTION") {
      throw BvhError("UnbalancedBraces", cur.line(),
                     "MOTION before closing '{' opened at line " +
                         std::to_string(st.brace_lines.back()));
    } else {
      throw BvhError("Syntax", cur.line(),
                     "expected JOINT, End Site or '}', got '" + cur.peek() + "'");
    }
  }
}

void parse_joint(Cursor& cur, ParserState& st, int parent) {
  int ln = cur.line();
  std::string name = cur.take();
  if (name == "{" || name == "}") throw BvhError("Syntax", ln, "missing joint name");
  Joint j;
  j.name = name;
  j.parent = parent;
  int idx = st.skel.joint_count();
  st.skel.joints.push_back(j);
  parse_joint_body(cur, st, idx);
}

Eigen::Quaterniond compose_euler(const std::vector<Channel>& rot_order,
                                 const double* degrees) {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  for (size_t i = 0; i < rot_order.size(); ++i) {
    double rad = degrees[i] * M_PI / 180.0;
    q = q * Eigen::Quaterniond(Eigen::AngleAxisd(rad, channel_axis(rot_order[i])));
  }
  return q;
}

}  // namespace

bool is_rotation(Channel c) {
  return c == Channel::Xrot || c == Channel::Yrot || c == Channel::Zrot;
}

int Skeleton::root() const {
  for (int i = 0; i < joint_count(); ++i)
    if (joints[i].parent < 0) return i;
  return -1;
}

std::vector<std::vector<int>> Skeleton::children() const {
  std::vector<std::vector<int>> ch(joints.size());
  for (int i = 0; i < joint_count(); ++i)
    if (joints[i].parent >= 0) ch[joints[i].parent].push_back(i);
  return ch;
}

int Skeleton::find_joint(const std::string& name) const {
  for (int i = 0; i < joint_count(); ++i)
    if (joints[i].name == name) return i;
  return -1;
}

bool Skeleton::is_end_joint(int i) const {
  for (const auto& es : end_sites)
    if (es.joint == i) return true;
  return false;
}

std::vector<Eigen::Vector3d> Skeleton::rest_global_positions() const {
  std::vector<Eigen::Vector3d> pos(joints.size());
  for (int i = 0; i < joint_count(); ++i) {
    int p = joints[i].parent;
    pos[i] = (p < 0) ? Eigen::Vector3d(Eigen::Vector3d::Zero())
                     : Eigen::Vector3d(pos[p] + joints[i].rest_offset);
  }
  return pos;
}

double Skeleton::rest_height() const {
  auto pos = rest_global_positions();
  double lo = 0.0, hi = 0.0;
  for (const auto& p : pos) {
    lo = std::min(lo, p.y());
    hi = std::max(hi, p.y());
  }
  return hi - lo;
}

void MotionClip::validate() const {
  const int J = skeleton.joint_count();
  if (frame_count() < 1) throw Error("DimensionMismatch", "clip has no frames");
  if (frame_time <= 0.0) throw Error("NonPositiveFrameTime", "frame_time must be > 0");
  if (static_cast<int>(rotations.size()) != frame_count())
    throw Error("DimensionMismatch", "rotation frames != position frames");
  for (const auto& frame : rotations) {
    if (static_cast<int>(frame.size()) != J)
      throw Error("DimensionMismatch", "rotation row width != joint count");
    for (const auto& q : frame)
      if (std::abs(q.norm() - 1.0) > 1e-6)
        throw Error("NonUnitQuaternion", "quaternion norm deviates from 1");
  }
}

std::pair<Skeleton, MotionClip> parse_bvh(const std::string& text, UnitPolicy units) {
  Cursor cur(tokenize(text));
  ParserState st;

  cur.expect("HIERARCHY");
  cur.expect("ROOT");
  parse_joint(cur, st, -1);
  if (!st.brace_lines.empty())
    throw BvhError("UnbalancedBraces", cur.line(),
                   "unclosed '{' opened at line " + std::to_string(st.brace_lines.back()));

  cur.expect("MOTION");
  {
    int ln = cur.line();
    std::string tok = cur.take();
    if (tok != "Frames:")
      throw BvhError("Syntax", ln, "expected 'Frames:', got '" + tok + "'");
  }
  int declared_frames = static_cast<int>(cur.take_number("frame count"));
  {
    int ln = cur.line();
    std::string tok = cur.take();
    if (tok != "Frame") throw BvhError("Syntax", ln, "expected 'Frame Time:', got '" + tok + "'");
    cur.expect("Time:");
  }
  int ft_line = cur.line();
  double frame_time = cur.take_number("frame time");
  if (frame_time <= 0.0)
    throw BvhError("NonPositiveFrameTime", ft_line,
                   "frame time " + std::to_string(frame_time));

  Skeleton& skel = st.skel;
  const int J = skel.joint_count();

  // Unit heuristic: BVH carries no unit field. Offsets above human scale are
  // assumed to be centimeters unless the caller overrides.
  double scale = 1.0;
  if (units == UnitPolicy::Centimeters) {
    scale = 0.01;
  } else if (units == UnitPolicy::Auto) {
    if (skel.rest_height() > 10.0) {
      scale = 0.01;
      warn("rest-pose height exceeds 10; interpreting BVH translations as centimeters "
           "(use the units override to force meters)");
    }
  }
  if (scale != 1.0) {
    for (auto& j : skel.joints) j.rest_offset *= scale;
    for (auto& es : skel.end_sites) es.offset *= scale;
  }

  int total_channels = 0;
  for (const auto& j : skel.joints) total_channels += static_cast<int>(j.channels.size());

  MotionClip clip;
  clip.frame_time = frame_time;
  bool warned_nonroot_pos = false;

  for (int f = 0; f < declared_frames; ++f) {
    if (cur.done())
      throw BvhError("FrameCountMismatch", cur.line(),
                     "declared " + std::to_string(declared_frames) + " frames, found " +
                         std::to_string(f));
    std::vector<double> row(total_channels);
    for (int c = 0; c < total_channels; ++c) row[c] = cur.take_number("channel value");

    Eigen::Vector3d root_pos = Eigen::Vector3d::Zero();
    std::vector<Eigen::Quaterniond> rots(J, Eigen::Quaterniond::Identity());
    int c = 0;
    for (int ji = 0; ji < J; ++ji) {
      const Joint& j = skel.joints[ji];
      std::vector<Channel> rot_order;
      double degs[3];
      for (Channel ch : j.channels) {
        double v = row[c++];
        if (is_rotation(ch)) {
          rot_order.push_back(ch);
          degs[rot_order.size() - 1] = v;
        } else {
          if (j.parent < 0) {
            if (ch == Channel::Xpos) root_pos.x() = v * scale;
            if (ch == Channel::Ypos) root_pos.y() = v * scale;
            if (ch == Channel::Zpos) root_pos.z() = v * scale;
          } else if (!warned_nonroot_pos) {
            warn("non-root position channels on joint '" + j.name +
                 "' are ignored (clips carry root translation only)");
            warned_nonroot_pos = true;
          }
        }
      }
      if (!rot_order.empty()) rots[ji] = compose_euler(rot_order, degs);
    }
    clip.root_positions.push_back(root_pos);
    clip.rotations.push_back(std::move(rots));
  }
  if (!cur.done())
    throw BvhError("FrameCountMismatch", cur.line(),
                   "declared " + std::to_string(declared_frames) +
                       " frames but extra data follows");

  clip.skeleton = skel;
  clip.validate();
  return {skel, clip};
}

namespace {

// ZXY Euler angles (radians) of R = Rz*Rx*Ry, choosing the solution closest
// to `prev` (per-channel 2pi unwrapping over both gimbal branches).
Eigen::Vector3d quat_to_zxy(const Eigen::Quaterniond& q, const Eigen::Vector3d* prev) {
  Eigen::Matrix3d R = q.normalized().toRotationMatrix();
  double sx = std::clamp(R(2, 1), -1.0, 1.0);
  Eigen::Vector3d a, b;
  if (std::abs(sx) > 1.0 - 1e-9) {
    // Gimbal: only z +/- y is determined; keep y from the previous frame.
    double x = std::copysign(M_PI / 2.0, sx);
    double y = prev ? (*prev)(2) : 0.0;
    double zy = (sx > 0) ? std::atan2(R(0, 2), R(0, 0))     // z + y
                         : std::atan2(-R(0, 2), R(0, 0));   // z - y
    double z = (sx > 0) ? zy - y : zy + y;
    a = {z, x, y};
    b = a;
  } else {
    double x = std::asin(sx);
    double z = std::atan2(-R(0, 1), R(1, 1));
    double y = std::atan2(-R(2, 0), R(2, 2));
    a = {z, x, y};
    b = {z + M_PI, M_PI - x, y + M_PI};  // equivalent branch
  }
  if (!prev) {
    return a;
  }
  auto unwrap = [&](Eigen::Vector3d v) {
    for (int i = 0; i < 3; ++i) {
      double d = v(i) - (*prev)(i);
      v(i) -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
    }
    return v;
  };
  a = unwrap(a);
  b = unwrap(b);
  double da = (a - *prev).cwiseAbs().sum();
  double db = (b - *prev).cwiseAbs().sum();
  return da <= db ? a : b;
}

void append_number(std::string& out, double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  out += buf;
}

void write_joint(std::string& out, const Skeleton& skel,
                 const std::vector<std::vector<int>>& children, int ji, int depth,
                 std::vector<int>* channel_order) {
  std::string ind(depth, '\t');
  const Joint& j = skel.joints[ji];
  const bool end_joint = skel.is_end_joint(ji) || (j.channels.empty() && children[ji].empty());
  if (end_joint) {
    out += ind + "End Site\n" + ind + "{\n";
    out += ind + "\tOFFSET ";
    append_number(out, j.rest_offset.x());
    out += ' ';
    append_number(out, j.rest_offset.y());
    out += ' ';
    append_number(out, j.rest_offset.z());
    out += "\n" + ind + "}\n";
    return;
  }
  out += ind + (j.parent < 0 ? "ROOT " : "JOINT ") + j.name + "\n" + ind + "{\n";
  out += ind + "\tOFFSET ";
  append_number(out, j.rest_offset.x());
  out += ' ';
  append_number(out, j.rest_offset.y());
  out += ' ';
  append_number(out, j.rest_offset.z());
  out += '\n';
  if (j.parent < 0) {
    out += ind +
           "\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n";
  } else {
    out += ind + "\tCHANNELS 3 Zrotation Xrotation Yrotation\n";
  }
  channel_order->push_back(ji);
  for (int c : children[ji]) write_joint(out, skel, children, c, depth + 1, channel_order);
  out += ind + "}\n";
}

}  // namespace

std::string write_bvh(const Skeleton& skeleton, const MotionClip& clip) {
  const int J = skeleton.joint_count();
  if (clip.skeleton.joint_count() != J)
    throw Error("DimensionMismatch", "clip joint count != skeleton joint count");
  if (static_cast<int>(clip.rotations.size()) != clip.frame_count())
    throw Error("DimensionMismatch", "rotation frames != position frames");
  for (const auto& frame : clip.rotations)
    if (static_cast<int>(frame.size()) != J)
      throw Error("DimensionMismatch", "rotation row width != joint count");

  auto children = skeleton.children();
  int root = skeleton.root();
  if (root < 0) throw Error("DimensionMismatch", "skeleton has no root");

  std::string out = "HIERARCHY\n";
  std::vector<int> channel_order;
  write_joint(out, skeleton, children, root, 0, &channel_order);

  const int T = clip.frame_count();
  out += "MOTION\nFrames: " + std::to_string(T) + "\nFrame Time: ";
  append_number(out, clip.frame_time);
  out += '\n';

  std::vector<Eigen::Vector3d> prev(channel_order.size());
  for (int f = 0; f < T; ++f) {
    std::string row;
    bool first = true;
    for (size_t k = 0; k < channel_order.size(); ++k) {
      int ji = channel_order[k];
      if (skeleton.joints[ji].parent < 0) {
        for (int d = 0; d < 3; ++d) {
          if (!first) row += ' ';
          first = false;
          append_number(row, clip.root_positions[f](d));
        }
      }
      Eigen::Vector3d zxy =
          quat_to_zxy(clip.rotations[f][ji], f > 0 ? &prev[k] : nullptr);
      prev[k] = zxy;
      for (int d = 0; d < 3; ++d) {
        if (!first) row += ' ';
        first = false;
        append_number(row, zxy(d) * 180.0 / M_PI);
      }
    }
    out += row;
    out += '\n';
  }
  return out;
}

}  // namespace sata::bvh
