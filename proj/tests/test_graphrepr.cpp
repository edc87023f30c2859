#include "sata/graphrepr.hpp"

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sata/semantics.hpp"

using namespace sata;
using namespace sata::test;

namespace {

std::vector<std::vector<float>> dummy_embeddings(int j, int d = 4) {
  return std::vector<std::vector<float>>(j, std::vector<float>(d, 0.5f));
}

// A little walking chain: root drifts forward, one joint oscillates.
bvh::MotionClip make_moving_clip(int frames) {
  auto skel = make_chain({{0, 0.8, 0}, {0, 0.4, 0}, {0, 0.4, 0}});
  bvh::MotionClip clip = identity_clip(skel, frames);
  for (int t = 0; t < frames; ++t) {
    clip.root_positions[t] = {0, 0.8, 0.03 * t};
    clip.rotations[t][1] = xrot(0.4 * std::sin(0.3 * t));
    clip.rotations[t][2] = zrot(0.2 * std::cos(0.25 * t));
  }
  return clip;
}

}  // namespace

TEST_CASE("build_static depths") {
  SUBCASE("five joint chain") {
    auto skel = make_chain({{0, 0, 0}, {0, 1, 0}, {0, 1, 0}, {0, 1, 0}, {0, 1, 0}});
    auto [edges, st] = repr::build_static(skel, dummy_embeddings(5));
    REQUIRE(edges.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(edges[i].depth == i + 1);
      CHECK(edges[i].reverse_depth == 3 - i);
    }
    CHECK(st.x_global[0][0] == 0.0f);
    CHECK(st.x_global[4][1] == doctest::Approx(4.0f));
    CHECK(st.x_local[2][1] == doctest::Approx(1.0f));
  }
  SUBCASE("single joint") {
    auto skel = make_chain({{0, 0, 0}});
    auto [edges, st] = repr::build_static(skel, dummy_embeddings(1));
    CHECK(edges.empty());
    CHECK(st.x_global[0] == std::array<float, 3>{0, 0, 0});
    CHECK(st.x_local[0] == std::array<float, 3>{0, 0, 0});
  }
  SUBCASE("Y-shaped tree root edges have reverse depth 1") {
    bvh::Skeleton s = make_chain({{0, 0, 0}});
    auto add = [&](int parent, const std::string& name) {
      bvh::Joint j;
      j.name = name;
      j.parent = parent;
      j.rest_offset = {0, 1, 0};
      j.channels = {bvh::Channel::Zrot, bvh::Channel::Xrot, bvh::Channel::Yrot};
      s.joints.push_back(j);
      return s.joint_count() - 1;
    };
    int a1 = add(0, "a1");
    add(a1, "a2");
    int b1 = add(0, "b1");
    add(b1, "b2");
    auto [edges, st] = repr::build_static(s, dummy_embeddings(5));
    for (const auto& e : edges)
      if (e.parent == 0) CHECK(e.reverse_depth == 1);
  }
  SUBCASE("embedding count mismatch") {
    auto skel = make_chain({{0, 0, 0}, {0, 1, 0}});
    CHECK_THROWS_WITH_AS(repr::build_static(skel, dummy_embeddings(3)),
                         doctest::Contains("EmbeddingCountMismatch"), Error);
  }
}

TEST_CASE("derive_contacts") {
  const double height = 1.0;
  SUBCASE("resting foot contacts every frame; lifted foot never") {
    std::vector<std::vector<Eigen::Vector3d>> pos(
        10, {Eigen::Vector3d(0, 0.0, 0), Eigen::Vector3d(0, 0.5, 0)});
    auto flags = repr::derive_contacts(pos, 1.0 / 30, {0, 1}, height);
    for (int t = 0; t < 10; ++t) {
      CHECK(flags[t][0] == 1);
      CHECK(flags[t][1] == 0);
    }
  }
  SUBCASE("plant-and-lift matches a brute-force threshold oracle") {
    std::vector<std::vector<Eigen::Vector3d>> pos;
    for (int t = 0; t < 40; ++t) {
      double y = std::max(0.0, 0.2 * std::sin(0.4 * t));
      pos.push_back({Eigen::Vector3d(0.01 * t, y, 0)});
    }
    auto flags = repr::derive_contacts(pos, 1.0 / 30, {0}, height);

    // Independent oracle: direct evaluation of the thresholds.
    std::vector<double> hs;
    for (auto& f : pos) hs.push_back(f[0].y());
    std::sort(hs.begin(), hs.end());
    double ground = hs[static_cast<size_t>(0.02 * (hs.size() - 1))];
    for (int t = 0; t < 40; ++t) {
      int ts = t > 0 ? t : 1;
      double speed = (pos[ts][0] - pos[ts - 1][0]).norm();
      bool expect = (pos[t][0].y() - ground < 0.05 * height) && (speed < 0.01 * height);
      CHECK(flags[t][0] == (expect ? 1 : 0));
    }
  }
  SUBCASE("empty contact set warns and returns zeros") {
    std::vector<std::vector<Eigen::Vector3d>> pos(3, {Eigen::Vector3d(0, 0, 0)});
    int warnings = 0;
    set_warning_handler([&](const std::string&) { ++warnings; });
    auto flags = repr::derive_contacts(pos, 1.0 / 30, {}, height);
    set_warning_handler({});
    CHECK(warnings == 1);
    for (auto& f : flags) CHECK(f[0] == 0);
  }
  SUBCASE("invariant to horizontal translation") {
    auto clip = make_moving_clip(30);
    auto pos = kin::global_positions(clip);
    auto moved = pos;
    for (auto& f : moved)
      for (auto& p : f) p += Eigen::Vector3d(5, 0, -3);
    auto a = repr::derive_contacts(pos, 1.0 / 30, {2}, height);
    auto b = repr::derive_contacts(moved, 1.0 / 30, {2}, height);
    CHECK(a == b);
  }
}

TEST_CASE("extract_dynamics root channels") {
  auto skel = make_chain({{0, 1, 0}, {0, 0.5, 0}});
  SUBCASE("static pose has zero velocities") {
    auto clip = identity_clip(skel, 6);
    for (auto& p : clip.root_positions) p = {0, 1, 0};
    auto seq = repr::extract_dynamics(clip, {1});
    for (int t = 0; t < 6; ++t)
      for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < 6; ++k) CHECK(seq.dyn(t, j, repr::kVqOff + k) == 0.0f);
        for (int k = 0; k < 3; ++k) CHECK(seq.dyn(t, j, repr::kVxOff + k) == 0.0f);
        CHECK(seq.dyn(t, j, repr::kROff + 0) == 0.0f);
        CHECK(seq.dyn(t, j, repr::kROff + 1) == 0.0f);
        CHECK(seq.dyn(t, j, repr::kROff + 2) == 0.0f);
        CHECK(seq.dyn(t, j, repr::kROff + 3) == doctest::Approx(1.0f));
      }
  }
  SUBCASE("constant forward translation shows up as rz") {
    auto clip = identity_clip(skel, 5);
    for (int t = 0; t < 5; ++t) clip.root_positions[t] = {0, 1, 0.05 * t};
    auto seq = repr::extract_dynamics(clip, {1});
    for (int t = 1; t < 5; ++t) {
      CHECK(seq.dyn(t, 0, repr::kROff + 0) == doctest::Approx(0.0f));
      CHECK(seq.dyn(t, 0, repr::kROff + 1) == doctest::Approx(0.0f));
      CHECK(seq.dyn(t, 0, repr::kROff + 2) == doctest::Approx(0.05f));
    }
  }
  SUBCASE("constant yaw rate shows up as ra") {
    auto clip = identity_clip(skel, 5);
    for (int t = 0; t < 5; ++t) {
      clip.root_positions[t] = {0, 1, 0};
      clip.rotations[t][0] = yrot(t * M_PI / 180.0);
    }
    auto seq = repr::extract_dynamics(clip, {1});
    for (int t = 1; t < 5; ++t) {
      CHECK(seq.dyn(t, 0, repr::kROff + 0) == doctest::Approx(M_PI / 180.0).epsilon(1e-4));
      CHECK(seq.dyn(t, 0, repr::kROff + 3) == doctest::Approx(1.0f));
    }
  }
}

TEST_CASE("recover_motion") {
  auto skel = make_chain({{0, 1, 0}, {0, 0.5, 0}});
  const int J = 2;
  SUBCASE("zero r and identity q give the rest pose at the origin") {
    std::vector<std::vector<float>> out(4, std::vector<float>(J * repr::kOutWidth, 0.0f));
    for (auto& row : out)
      for (int j = 0; j < J; ++j) {
        row[j * repr::kOutWidth + 0] = 1.0f;  // identity sixd
        row[j * repr::kOutWidth + 4] = 1.0f;
      }
    auto rec = repr::recover_motion(out, skel, 1.0 / 30);
    CHECK(rec.degenerate_sixd_count == 0);
    for (int t = 0; t < 4; ++t) {
      CHECK(rec.clip.root_positions[t].norm() == doctest::Approx(0.0));
      for (int j = 0; j < J; ++j)
        CHECK(rec.clip.rotations[t][j].angularDistance(Eigen::Quaterniond::Identity()) <
              1e-9);
    }
  }
  SUBCASE("constant rz integrates to a cumulative sum from zero") {
    std::vector<std::vector<float>> out(3, std::vector<float>(J * repr::kOutWidth, 0.0f));
    for (auto& row : out)
      for (int j = 0; j < J; ++j) {
        row[j * repr::kOutWidth + 0] = 1.0f;
        row[j * repr::kOutWidth + 4] = 1.0f;
        row[j * repr::kOutWidth + 8] = 0.05f;  // rz, including frame 0 (ignored)
      }
    auto rec = repr::recover_motion(out, skel, 1.0 / 30);
    CHECK(rec.clip.root_positions[0].z() == doctest::Approx(0.0));
    CHECK(rec.clip.root_positions[1].z() == doctest::Approx(0.05));
    CHECK(rec.clip.root_positions[2].z() == doctest::Approx(0.10));
  }
  SUBCASE("degenerate sixd rows fall back to identity and are counted") {
    std::vector<std::vector<float>> out(1, std::vector<float>(J * repr::kOutWidth, 0.0f));
    out[0][0 * repr::kOutWidth + 0] = 1.0f;
    out[0][0 * repr::kOutWidth + 4] = 1.0f;
    // joint 1 left all-zero: degenerate
    set_warning_handler([](const std::string&) {});
    auto rec = repr::recover_motion(out, skel, 1.0 / 30);
    set_warning_handler({});
    CHECK(rec.degenerate_sixd_count == 1);
    CHECK(rec.clip.rotations[0][1].angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);
  }
}

TEST_CASE("extract -> recover round trip") {
  auto clip = kin::canonicalize(make_moving_clip(48));
  auto seq = repr::extract_dynamics(clip, {2});

  // Assemble decoder-layout outputs from the ground-truth features.
  const int J = seq.joint_count;
  std::vector<std::vector<float>> outs(seq.frame_count(),
                                       std::vector<float>(J * repr::kOutWidth));
  for (int t = 0; t < seq.frame_count(); ++t)
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < 6; ++k)
        outs[t][j * repr::kOutWidth + k] = seq.dyn(t, j, repr::kQOff + k);
      for (int k = 0; k < 4; ++k)
        outs[t][j * repr::kOutWidth + 6 + k] = seq.dyn(t, j, repr::kROff + k);
      outs[t][j * repr::kOutWidth + 10] = seq.dyn(t, j, repr::kCOff);
    }
  auto rec = repr::recover_motion(outs, clip.skeleton, clip.frame_time);
  CHECK(max_position_error(clip, rec.clip) < 1e-4);
  for (int t = 0; t < clip.frame_count(); ++t)
    for (int j = 0; j < J; ++j)
      CHECK(kin::geodesic_angle(clip.rotations[t][j], rec.clip.rotations[t][j]) < 1e-4);

  SUBCASE("bone lengths equal the target skeleton's exactly") {
    auto pos = kin::global_positions(rec.clip);
    for (int t = 0; t < rec.clip.frame_count(); ++t)
      for (int j = 1; j < J; ++j) {
        double len = (pos[t][j] - pos[t][clip.skeleton.joints[j].parent]).norm();
        CHECK(len == doctest::Approx(clip.skeleton.joints[j].rest_offset.norm()));
      }
  }
}

TEST_CASE("sequence cache round trip is byte-identical") {
  auto clip = kin::canonicalize(make_moving_clip(10));
  auto seq = repr::build_sequence(clip, dummy_embeddings(3), {2});
  auto bytes = repr::serialize_sequence(seq);
  auto seq2 = repr::deserialize_sequence(bytes);
  auto bytes2 = repr::serialize_sequence(seq2);
  CHECK(bytes == bytes2);
  CHECK(seq2.joint_count == seq.joint_count);
  CHECK(seq2.frames == seq.frames);
  CHECK(seq2.contact_joints == seq.contact_joints);
  CHECK_THROWS_AS(repr::deserialize_sequence(std::vector<uint8_t>{1, 2, 3}), Error);
}
