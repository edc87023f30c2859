#include "sata/inference.hpp"

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sata/synth.hpp"

using namespace sata;
using namespace sata::inference;

namespace {

model::ModelConfig tiny_config() {
  model::ModelConfig cfg;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  cfg.ff_inner = 16;
  cfg.blocks_per_side = 1;
  cfg.d_text = 8;
  cfg.sincos_bands = 2;
  cfg.window = 16;
  cfg.overlap = 4;
  cfg.bottleneck.latent = 8;
  return cfg;
}

std::vector<std::vector<std::vector<float>>> constant_windows(const WindowPlan& plan,
                                                              int width, float value) {
  std::vector<std::vector<std::vector<float>>> out;
  for (auto [s, e] : plan.spans)
    out.emplace_back(e - s, std::vector<float>(width, value));
  return out;
}

}  // namespace

TEST_CASE("window planning") {
  SUBCASE("exact fit gives a single span") {
    auto plan = plan_windows(64, 64, 16);
    REQUIRE(plan.spans.size() == 1);
    CHECK(plan.spans[0] == std::pair{0, 64});
  }
  SUBCASE("stride-48 spans with an end-aligned tail") {
    auto plan = plan_windows(112, 64, 16);
    REQUIRE(plan.spans.size() == 2);
    CHECK(plan.spans[0] == std::pair{0, 64});
    CHECK(plan.spans[1] == std::pair{48, 112});
  }
  SUBCASE("short inputs get one natural-length span") {
    auto plan = plan_windows(30, 64, 16);
    REQUIRE(plan.spans.size() == 1);
    CHECK(plan.spans[0] == std::pair{0, 30});
  }
  SUBCASE("invalid overlap is rejected") {
    CHECK_THROWS_WITH_AS(plan_windows(10, 8, 8), doctest::Contains("InvalidConfig"), Error);
  }
  SUBCASE("spans always cover [0, T) exactly once after stitching") {
    for (int T : {1, 5, 63, 64, 65, 100, 112, 200, 333}) {
      auto plan = plan_windows(T, 64, 16);
      auto rows = stitch(constant_windows(plan, 3, 1.0f), plan);
      CHECK(static_cast<int>(rows.size()) == T);
    }
  }
}

TEST_CASE("stitching") {
  SUBCASE("zero overlap equals concatenation in both modes") {
    for (auto mode : {WindowPlan::Mode::Crop, WindowPlan::Mode::Blend}) {
      auto plan = plan_windows(8, 4, 0, mode);
      REQUIRE(plan.spans.size() == 2);
      std::vector<std::vector<std::vector<float>>> outs = {
          {{1, 1}, {2, 2}, {3, 3}, {4, 4}}, {{5, 5}, {6, 6}, {7, 7}, {8, 8}}};
      auto rows = stitch(outs, plan);
      for (int f = 0; f < 8; ++f) CHECK(rows[f][0] == doctest::Approx(f + 1.0f));
    }
  }
  SUBCASE("identical windows pass through both modes unchanged") {
    for (auto mode : {WindowPlan::Mode::Crop, WindowPlan::Mode::Blend}) {
      auto plan = plan_windows(10, 6, 2, mode);
      auto rows = stitch(constant_windows(plan, 2, 3.5f), plan);
      for (const auto& r : rows) CHECK(r[0] == doctest::Approx(3.5f));
    }
  }
  SUBCASE("crop keeps the earlier window over the overlap") {
    auto plan = plan_windows(10, 6, 2, WindowPlan::Mode::Crop);
    REQUIRE(plan.spans.size() == 2);
    auto outs = constant_windows(plan, 1, 0.0f);
    for (auto& row : outs[0]) row[0] = 1.0f;
    for (auto& row : outs[1]) row[0] = 2.0f;
    auto rows = stitch(outs, plan);
    for (int f = 0; f < 6; ++f) CHECK(rows[f][0] == 1.0f);
    for (int f = 6; f < 10; ++f) CHECK(rows[f][0] == 2.0f);
  }
  SUBCASE("blend midpoint of an odd overlap is the arithmetic mean") {
    // spans [0,8) and [5,13): overlap length 3, midpoint at frame 6
    WindowPlan plan;
    plan.mode = WindowPlan::Mode::Blend;
    plan.overlap = 3;
    plan.spans = {{0, 8}, {5, 13}};
    auto outs = constant_windows(plan, 1, 0.0f);
    for (auto& row : outs[0]) row[0] = 2.0f;
    for (auto& row : outs[1]) row[0] = 4.0f;
    auto rows = stitch(outs, plan);
    CHECK(rows[6][0] == doctest::Approx(3.0f));  // (2+4)/2
    CHECK(rows[4][0] == doctest::Approx(2.0f));
    CHECK(rows[8][0] == doctest::Approx(4.0f));
  }
  SUBCASE("span mismatches are rejected") {
    auto plan = plan_windows(8, 4, 0);
    auto outs = constant_windows(plan, 1, 0.0f);
    outs.pop_back();
    CHECK_THROWS_WITH_AS(stitch(outs, plan), doctest::Contains("SpanMismatch"), Error);
  }
}

TEST_CASE("reconstruct with an untrained model is structurally sound") {
  auto cfg = tiny_config();
  model::SataModel m(cfg);
  m.init(3);
  synth::SynthSpec spec;
  spec.skeleton = "biped17";
  spec.motion = "walk_cycle";
  spec.frames = 40;  // forces two windows
  auto gen = synth::generate(spec);

  set_warning_handler([](const std::string&) {});
  auto r1 = reconstruct(gen.clip, gen.tags, m);
  auto r2 = reconstruct(gen.clip, gen.tags, m);
  set_warning_handler({});

  CHECK(r1.clip.frame_count() == gen.clip.frame_count());
  auto pos = kin::global_positions(r1.clip);
  for (const auto& frame : pos)
    for (const auto& p : frame) CHECK(std::isfinite(p.norm()));
  // bone lengths equal the source rest lengths exactly
  for (int f = 0; f < r1.clip.frame_count(); ++f)
    for (int j = 0; j < r1.clip.skeleton.joint_count(); ++j) {
      int p = r1.clip.skeleton.joints[j].parent;
      if (p < 0) continue;
      CHECK((pos[f][j] - pos[f][p]).norm() ==
            doctest::Approx(gen.clip.skeleton.joints[j].rest_offset.norm()).epsilon(1e-9));
    }
  // deterministic at inference
  CHECK(bvh::write_bvh(r1.clip.skeleton, r1.clip) == bvh::write_bvh(r2.clip.skeleton, r2.clip));
}

TEST_CASE("retargeting") {
  auto cfg = tiny_config();
  model::SataModel m(cfg);
  m.init(5);
  synth::SynthSpec spec;
  spec.skeleton = "biped17";
  spec.motion = "walk_cycle";
  spec.frames = 24;
  auto gen = synth::generate(spec);
  set_warning_handler([](const std::string&) {});

  SUBCASE("identical target reproduces reconstruct bit-for-bit") {
    auto rec = reconstruct(gen.clip, gen.tags, m);
    auto ret = retarget(gen.clip, gen.tags, gen.clip.skeleton, gen.tags, m);
    CHECK(bvh::write_bvh(rec.clip.skeleton, rec.clip) ==
          bvh::write_bvh(ret.clip.skeleton, ret.clip));
  }
  SUBCASE("doubled skeleton doubles every bone length exactly") {
    synth::SynthSpec big = spec;
    big.scale = 2.0;
    auto target = synth::generate(big);
    auto ret = retarget(gen.clip, gen.tags, target.clip.skeleton, target.tags, m);
    auto pos = kin::global_positions(ret.clip);
    for (int f = 0; f < ret.clip.frame_count(); ++f)
      for (int j = 0; j < ret.clip.skeleton.joint_count(); ++j) {
        int p = ret.clip.skeleton.joints[j].parent;
        if (p < 0) continue;
        CHECK((pos[f][j] - pos[f][p]).norm() ==
              doctest::Approx(2.0 * gen.clip.skeleton.joints[j].rest_offset.norm())
                  .epsilon(1e-9));
      }
  }
  SUBCASE("cross-species target stays structurally valid") {
    synth::SynthSpec quad;
    quad.skeleton = "quadruped13";
    auto target = synth::generate(quad);
    auto ret = retarget(gen.clip, gen.tags, target.clip.skeleton, target.tags, m);
    CHECK(ret.clip.frame_count() == gen.clip.frame_count());
    CHECK(ret.clip.skeleton.joint_count() == target.clip.skeleton.joint_count());
    for (const auto& frame : kin::global_positions(ret.clip))
      for (const auto& p : frame) CHECK(std::isfinite(p.norm()));
  }
  set_warning_handler({});
}

TEST_CASE("embedding provider dimension must match the model") {
  auto cfg = tiny_config();
  model::SataModel m(cfg);
  m.init(7);
  synth::SynthSpec spec;
  spec.frames = 8;
  auto gen = synth::generate(spec);
  sem::HashEmbeddingProvider wrong(cfg.d_text + 1, 0);
  PipelineOptions opt;
  opt.provider = &wrong;
  CHECK_THROWS_WITH_AS(reconstruct(gen.clip, gen.tags, m, opt),
                       doctest::Contains("DimensionMismatch"), Error);
}
