#include "sata/kinematics.hpp"

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

using namespace sata;
using namespace sata::test;

TEST_CASE("quat_to_sixd on identity and axis rotations") {
  auto s = kin::quat_to_sixd(Eigen::Quaterniond::Identity());
  CHECK(s.a.isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(s.b.isApprox(Eigen::Vector3d(0, 1, 0)));

  auto sy = kin::quat_to_sixd(yrot(M_PI / 2));
  CHECK((sy.a - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);
  CHECK((sy.b - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("double cover maps to identical sixd exactly") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Eigen::Quaterniond q = random_unit_quat(rng);
    Eigen::Quaterniond nq(-q.w(), -q.x(), -q.y(), -q.z());
    auto a = kin::quat_to_sixd(q);
    auto b = kin::quat_to_sixd(nq);
    CHECK(a.a == b.a);
    CHECK(a.b == b.b);
  }
}

TEST_CASE("quat_to_sixd rejects non-unit input") {
  CHECK_THROWS_AS(kin::quat_to_sixd(Eigen::Quaterniond(2, 0, 0, 0)), Error);
}

TEST_CASE("sixd_to_quat gram-schmidt") {
  kin::SixD id{{1, 0, 0}, {0, 1, 0}};
  CHECK(kin::sixd_to_quat(id).angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);

  kin::SixD skew{{2, 0, 0}, {0.5, 1, 0}};
  CHECK(kin::sixd_to_quat(skew).angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);

  CHECK_THROWS_WITH_AS(kin::sixd_to_quat({{0, 0, 0}, {0, 1, 0}}),
                       doctest::Contains("DegenerateSixD"), Error);
  CHECK_THROWS_WITH_AS(kin::sixd_to_quat({{1, 0, 0}, {2, 0, 0}}),
                       doctest::Contains("DegenerateSixD"), Error);
}

TEST_CASE("quat/sixd round trip over 1000 random rotations") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Quaterniond q = random_unit_quat(rng);
    Eigen::Quaterniond back = kin::sixd_to_quat(kin::quat_to_sixd(q));
    CHECK(kin::geodesic_angle(q, back) < 1e-6);
    CHECK(back.w() >= 0.0);
  }
}

TEST_CASE("forward kinematics") {
  auto skel = make_chain({{0, 0, 0}, {0, 1, 0}, {0, 1, 0}});
  std::vector<Eigen::Quaterniond> rots(3, Eigen::Quaterniond::Identity());

  SUBCASE("identity = cumulative offsets") {
    auto pos = kin::forward_kinematics(skel, rots, {0, 0, 0});
    CHECK(pos[1].isApprox(Eigen::Vector3d(0, 1, 0)));
    CHECK(pos[2].isApprox(Eigen::Vector3d(0, 2, 0)));
  }
  SUBCASE("root rotation 90deg about Z") {
    rots[0] = zrot(M_PI / 2);
    auto pos = kin::forward_kinematics(skel, rots, {0, 0, 0});
    CHECK((pos[1] - Eigen::Vector3d(-1, 0, 0)).norm() < 1e-12);
    CHECK((pos[2] - Eigen::Vector3d(-2, 0, 0)).norm() < 1e-12);
  }
  SUBCASE("translation equivariance") {
    Eigen::Vector3d d(3, -1, 2);
    auto p0 = kin::forward_kinematics(skel, rots, {0, 0, 0});
    auto p1 = kin::forward_kinematics(skel, rots, d);
    for (int i = 0; i < 3; ++i) CHECK((p1[i] - p0[i] - d).norm() < 1e-12);
  }
  SUBCASE("dimension mismatch") {
    rots.pop_back();
    CHECK_THROWS_AS(kin::forward_kinematics(skel, rots, {0, 0, 0}), Error);
  }
}

TEST_CASE("canonicalize") {
  auto skel = make_chain({{0, 1, 0}, {0, 0.5, 0}});
  bvh::MotionClip clip = identity_clip(skel, 5);
  for (int t = 0; t < 5; ++t) clip.root_positions[t] = {0.1 * t, 1.0, 0.2 * t};

  SUBCASE("canonical clip is a fixed point") {
    bvh::MotionClip base = kin::canonicalize(clip);
    bvh::MotionClip twice = kin::canonicalize(base);
    CHECK(max_position_error(base, twice) < 1e-9);
  }
  SUBCASE("undoes a rigid transform") {
    bvh::MotionClip base = kin::canonicalize(clip);
    bvh::MotionClip moved = base;
    Eigen::Quaterniond r = yrot(M_PI / 2);
    for (int t = 0; t < 5; ++t) {
      moved.root_positions[t] = r * base.root_positions[t] + Eigen::Vector3d(3, 0, 5);
      moved.rotations[t][0] = r * base.rotations[t][0];
    }
    bvh::MotionClip back = kin::canonicalize(moved);
    CHECK(max_position_error(base, back) < 1e-5);
  }
  SUBCASE("root height preserved, frame-0 XZ at origin") {
    bvh::MotionClip c = kin::canonicalize(clip);
    CHECK(c.root_positions[0].x() == doctest::Approx(0.0));
    CHECK(c.root_positions[0].z() == doctest::Approx(0.0));
    CHECK(c.root_positions[0].y() == doctest::Approx(1.0));
  }
  SUBCASE("rigid motion preserves inter-joint distances") {
    clip.rotations[2][0] = yrot(1.0);
    bvh::MotionClip c = kin::canonicalize(clip);
    auto pa = kin::global_positions(clip);
    auto pb = kin::global_positions(c);
    for (int t = 0; t < 5; ++t)
      CHECK(std::abs((pa[t][0] - pa[t][1]).norm() - (pb[t][0] - pb[t][1]).norm()) < 1e-9);
  }
}

TEST_CASE("mirrored_name pairing rules") {
  auto rules = kin::default_side_rules();
  CHECK(kin::mirrored_name("LeftArm", rules) == "RightArm");
  CHECK(kin::mirrored_name("right_foot", rules) == "left_foot");
  CHECK(kin::mirrored_name("L_Hand", rules) == "R_Hand");
  CHECK(kin::mirrored_name("foot_l", rules) == "foot_r");
  CHECK(kin::mirrored_name("Spine", rules).empty());
  CHECK(kin::mirrored_name("hips_lower", rules).empty());
}

TEST_CASE("mirror") {
  auto skel = make_sided();
  bvh::MotionClip clip = identity_clip(skel, 8);

  SUBCASE("symmetric pose is a fixed point") {
    auto m = kin::mirror(clip);
    CHECK(max_position_error(clip, m) < 1e-12);
  }
  SUBCASE("involution") {
    for (int t = 0; t < 8; ++t) {
      clip.rotations[t][2] = zrot(0.3 * t);  // wave the left arm
      clip.root_positions[t] = {0.05 * t, 1.0, 0.1 * t};
    }
    auto twice = kin::mirror(kin::mirror(clip));
    CHECK(max_position_error(clip, twice) < 1e-9);
  }
  SUBCASE("left-wrist trajectory maps to right wrist with X negated") {
    int lhand = skel.find_joint("LeftHand");
    int rhand = skel.find_joint("RightHand");
    for (int t = 0; t < 8; ++t) clip.rotations[t][2] = zrot(0.2 + 0.1 * t);
    auto m = kin::mirror(clip);
    auto pa = kin::global_positions(clip);
    auto pb = kin::global_positions(m);
    for (int t = 0; t < 8; ++t) {
      Eigen::Vector3d expect = pa[t][lhand];
      expect.x() = -expect.x();
      CHECK((pb[t][rhand] - expect).norm() < 1e-9);
    }
  }
  SUBCASE("unpaired side joint is reported") {
    bvh::Skeleton bad = skel;
    bad.joints[2].name = "LeftOnlyArm";
    bvh::MotionClip c = identity_clip(bad, 1);
    CHECK_THROWS_WITH_AS(kin::mirror(c), doctest::Contains("UnpairedSideJoint"), Error);
  }
}
