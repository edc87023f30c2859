#include "sata/synth.hpp"

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sata/graphrepr.hpp"
#include "sata/semantics.hpp"

using namespace sata;
using namespace sata::test;

TEST_CASE("skeleton presets have the advertised joint counts") {
  auto count_real = [](const bvh::Skeleton& s) {
    int n = 0;
    for (int i = 0; i < s.joint_count(); ++i)
      if (!s.is_end_joint(i)) ++n;
    return n;
  };
  CHECK(count_real(synth::make_skeleton("chain5")) == 5);
  CHECK(count_real(synth::make_skeleton("biped17")) == 17);
  CHECK(count_real(synth::make_skeleton("quadruped13")) == 13);
  CHECK_THROWS_WITH_AS(synth::make_skeleton("octopod"), doctest::Contains("UnknownPreset"),
                       Error);
}

TEST_CASE("static preset holds the canonical pose") {
  synth::SynthSpec spec;
  spec.motion = "static";
  spec.frames = 8;
  auto gen = synth::generate(spec);
  for (int t = 1; t < 8; ++t) {
    CHECK(gen.clip.root_positions[t] == gen.clip.root_positions[0]);
    for (int j = 0; j < gen.clip.skeleton.joint_count(); ++j)
      CHECK(gen.clip.rotations[t][j].coeffs() == gen.clip.rotations[0][j].coeffs());
  }
  CHECK(gen.clip.root_positions[0].x() == doctest::Approx(0.0));
  CHECK(gen.clip.root_positions[0].z() == doctest::Approx(0.0));
}

TEST_CASE("walk cycle covers 0.05 m per frame") {
  synth::SynthSpec spec;
  spec.motion = "walk_cycle";
  spec.frames = 64;
  auto gen = synth::generate(spec);
  CHECK(gen.clip.root_positions[63].z() == doctest::Approx(3.15));
}

TEST_CASE("generation is byte-deterministic") {
  synth::SynthSpec spec;
  spec.skeleton = "quadruped13";
  spec.motion = "walk_cycle";
  spec.frames = 32;
  spec.seed = 9;
  auto a = synth::generate(spec);
  auto b = synth::generate(spec);
  CHECK(bvh::write_bvh(a.clip.skeleton, a.clip) == bvh::write_bvh(b.clip.skeleton, b.clip));
}

TEST_CASE("every preset round-trips through the representation") {
  for (const char* skel : {"chain5", "biped17", "quadruped13"}) {
    for (const char* motion : {"static", "sine_wave", "walk_cycle", "turn_in_place"}) {
      synth::SynthSpec spec;
      spec.skeleton = skel;
      spec.motion = motion;
      spec.frames = 24;
      auto gen = synth::generate(spec);

      // BVH round trip
      auto text = bvh::write_bvh(gen.clip.skeleton, gen.clip);
      auto [skel2, clip2] = bvh::parse_bvh(text);
      CHECK(max_position_error(gen.clip, clip2) < 1e-5);

      // representation round trip
      auto canon = kin::canonicalize(gen.clip);
      auto descs = sem::resolve_descriptions(canon.skeleton, gen.tags);
      auto contact = sem::contact_joint_set(canon.skeleton, descs);
      auto seq = repr::extract_dynamics(canon, contact);
      std::vector<std::vector<float>> outs(seq.frame_count());
      for (int t = 0; t < seq.frame_count(); ++t) {
        outs[t].resize(seq.joint_count * repr::kOutWidth);
        for (int j = 0; j < seq.joint_count; ++j) {
          for (int k = 0; k < 6; ++k)
            outs[t][j * repr::kOutWidth + k] = seq.dyn(t, j, repr::kQOff + k);
          for (int k = 0; k < 4; ++k)
            outs[t][j * repr::kOutWidth + 6 + k] = seq.dyn(t, j, repr::kROff + k);
          outs[t][j * repr::kOutWidth + 10] = seq.dyn(t, j, repr::kCOff);
        }
      }
      auto rec = repr::recover_motion(outs, canon.skeleton, canon.frame_time);
      INFO(skel, "/", motion);
      CHECK(max_position_error(canon, rec.clip) < 1e-4);
    }
  }
}

TEST_CASE("tags cover every joint including end joints") {
  for (const char* preset : {"chain5", "biped17", "quadruped13"}) {
    synth::SynthSpec spec;
    spec.skeleton = preset;
    auto gen = synth::generate(spec);
    for (const auto& j : gen.clip.skeleton.joints)
      CHECK(!gen.tags.lookup(j.name).empty());
  }
}

TEST_CASE("biped feet carry contact semantics near the ground") {
  synth::SynthSpec spec;
  spec.skeleton = "biped17";
  spec.motion = "static";
  auto gen = synth::generate(spec);
  auto descs = sem::resolve_descriptions(gen.clip.skeleton, gen.tags);
  auto contact = sem::contact_joint_set(gen.clip.skeleton, descs);
  CHECK(contact.size() >= 2);
  auto rest = gen.clip.skeleton.rest_global_positions();
  for (int j : contact) CHECK(rest[j].y() < 0.12);
}
