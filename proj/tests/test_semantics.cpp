#include "sata/semantics.hpp"

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

using namespace sata;
using namespace sata::test;

TEST_CASE("normalize_joint_name strips indices and folds case") {
  CHECK(sem::normalize_joint_name("Spine_1") == sem::normalize_joint_name("Spine_2"));
  CHECK(sem::normalize_joint_name("Spine_1") == "spine");
  CHECK(sem::normalize_joint_name("Hips") == "hips");
  CHECK(sem::normalize_joint_name("tentacle3") == "tentacle");
  CHECK(sem::normalize_joint_name("Left Arm-2") == "left_arm");
  // idempotent
  for (const char* n : {"Spine_1", "frontLegUpr_joint", "L_Hand", "x  y"}) {
    std::string once = sem::normalize_joint_name(n);
    CHECK(sem::normalize_joint_name(once) == once);
  }
}

TEST_CASE("dictionary resolution order and fallbacks") {
  auto skel = make_sided();
  auto descs = sem::resolve_descriptions(skel, sem::TagDictionary::human());
  CHECK(descs[skel.find_joint("LeftArm")] == "the left upper arm bone");
  CHECK(descs[skel.find_joint("Hips")] == "the pelvis and hip root anchor");

  SUBCASE("normalized match covers indexed variants") {
    sem::TagDictionary d;
    d.entries["Spine"] = "a spine bone segment";
    CHECK(d.lookup("Spine_1") == "a spine bone segment");
    CHECK(d.lookup("spine2") == "a spine bone segment");
  }
  SUBCASE("quadruped entry from the shipped template") {
    CHECK(sem::TagDictionary::quadruped().lookup("frontLegUpr_joint") ==
          "The upper bone of the front leg");
  }
  SUBCASE("unknown joints fall back to normalized names with warnings") {
    bvh::Skeleton s = make_chain({{0, 0, 0}, {0, 1, 0}});
    s.joints[1].name = "tentacle3";
    int warnings = 0;
    set_warning_handler([&](const std::string&) { ++warnings; });
    auto out = sem::resolve_descriptions(s, sem::TagDictionary{});
    set_warning_handler({});
    CHECK(out[1] == "tentacle");
    CHECK(warnings == 2);  // one per joint, empty dictionary
  }
}

TEST_CASE("tags file JSON round trip") {
  sem::TagDictionary d;
  d.entries["Hips"] = "the pelvis and hip root anchor";
  d.entries["Tail"] = "the tail bone segment";
  auto d2 = sem::TagDictionary::from_json(d.to_json());
  CHECK(d2.entries == d.entries);
  CHECK_THROWS_AS(sem::TagDictionary::from_json("[1,2]"), Error);
  CHECK_THROWS_AS(sem::TagDictionary::from_json("{\"a\": 3}"), Error);
}

TEST_CASE("hash embedding provider") {
  sem::HashEmbeddingProvider p(64, 123);
  SUBCASE("deterministic and unit length") {
    auto a = p.embed("the left upper arm bone");
    auto b = p.embed("the left upper arm bone");
    CHECK(a == b);
    double sq = 0;
    for (float x : a) sq += double(x) * x;
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-5));
  }
  SUBCASE("distinct descriptions are nearly orthogonal") {
    // 100 random pairs of distinct strings; cosine < 0.5 for all of them.
    for (int i = 0; i < 100; ++i) {
      auto a = p.embed("desc_a_" + std::to_string(i));
      auto b = p.embed("desc_b_" + std::to_string(i));
      double dot = 0;
      for (size_t k = 0; k < a.size(); ++k) dot += double(a[k]) * b[k];
      CHECK(std::abs(dot) < 0.5);
    }
  }
}

TEST_CASE("table embedding provider") {
  const char* json = R"({"dimension": 8,
    "vectors": {"pelvis": [1,2,3,4,5,6,7,8]}})";
  sem::TableEmbeddingProvider p(sem::EmbeddingTable::from_json(json));
  auto v = p.embed("pelvis");
  CHECK(v == std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
  SUBCASE("missing descriptions are listed") {
    try {
      sem::embed_all({"pelvis", "nope", "also nope"}, p);
      FAIL("expected MissingEmbedding");
    } catch (const Error& e) {
      CHECK(e.kind() == "MissingEmbedding");
      CHECK(std::string(e.what()).find("nope") != std::string::npos);
      CHECK(std::string(e.what()).find("also nope") != std::string::npos);
    }
  }
  SUBCASE("dimension mismatch rejected at load") {
    CHECK_THROWS_AS(
        sem::EmbeddingTable::from_json(R"({"dimension": 4, "vectors": {"x": [1,2]}})"),
        Error);
  }
}

TEST_CASE("contact joint selection") {
  auto skel = make_sided();
  SUBCASE("token match on descriptions") {
    std::vector<std::string> descs(skel.joint_count(), "a bone");
    descs[skel.find_joint("LeftHand")] = "the left front paw";
    auto set = sem::contact_joint_set(skel, descs);
    CHECK(set == std::vector<int>{skel.find_joint("LeftHand")});
  }
  SUBCASE("fallback to lowest leaves when no token matches") {
    bvh::Skeleton s = make_chain({{0, 1, 0}, {0, -1, 0}, {0, -0.1, 0}});
    std::vector<std::string> descs(s.joint_count(), "a bone");
    auto set = sem::contact_joint_set(s, descs);
    CHECK(set == std::vector<int>{2});
  }
}
