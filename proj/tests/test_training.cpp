#include "sata/training.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "sata/checkpoint.hpp"
#include "sata/inference.hpp"
#include "sata/synth.hpp"

using namespace sata;
using namespace sata::training;
using ad::Tensor;
using model::CtxT;

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
  cfg.window = 6;
  cfg.overlap = 2;
  cfg.bottleneck.latent = 8;
  cfg.bottleneck.quantizers = 2;
  cfg.bottleneck.codebook = 6;
  return cfg;
}

repr::MotionGraphSequence make_seq(const model::ModelConfig& cfg, const char* skeleton,
                                   const char* motion, int frames, uint64_t seed = 0) {
  synth::SynthSpec spec;
  spec.skeleton = skeleton;
  spec.motion = motion;
  spec.frames = frames;
  spec.seed = seed;
  auto gen = synth::generate(spec);
  inference::PipelineOptions opt;
  return inference::sequence_for_model(kin::canonicalize(gen.clip), gen.tags, cfg, opt);
}

// Decoder-layout outputs assembled from the ground truth itself; contact
// logits saturated so the sigmoid reproduces the flags.
Tensor outputs_from_gt(const WindowGtT<float>& gt) {
  Tensor out = Tensor::zeros({gt.T * gt.N, repr::kOutWidth});
  for (int f = 0; f < gt.T; ++f)
    for (int j = 0; j < gt.N; ++j) {
      const int row = f * gt.N + j;
      for (int k = 0; k < 6; ++k) out.at(row, k) = gt.q.at(row, k);
      int g = gt.node_graph[j];
      for (int k = 0; k < 4; ++k) out.at(row, 6 + k) = gt.r_root.at(g * gt.T + f, k);
      out.at(row, 10) = gt.contacts.at(row, 0) > 0.5f ? 15.0f : -15.0f;
    }
  return out;
}

}  // namespace

TEST_CASE("kl loss closed forms") {
  ad::Tape t;
  CtxT<float> cx(t);
  auto scalar_kl = [&](float mu, float logvar) {
    Tensor m({1, 1}, {mu});
    Tensor lv({1, 1}, {logvar});
    return t.val(kl_loss<float>(cx, t.constant(m), t.constant(lv))).data[0];
  };
  CHECK(scalar_kl(0.0f, 0.0f) == doctest::Approx(0.0));
  CHECK(scalar_kl(1.0f, 0.0f) == doctest::Approx(0.5));
  CHECK(scalar_kl(0.0f, std::log(2.0f)) == doctest::Approx(0.5 * (2.0 - 1.0 - std::log(2.0))));
}

TEST_CASE("reconstruction loss vanishes at the ground truth") {
  auto cfg = tiny_config();
  auto seq = make_seq(cfg, "biped17", "walk_cycle", 24, 1);
  auto batch = make_window_batch<float>({{&seq, 4}}, cfg.window);
  ad::Tape t;
  CtxT<float> cx(t);
  LossWeights w;
  auto loss = reconstruction_loss(cx, t.constant(outputs_from_gt(batch.gt)), batch.gt, w);
  CHECK(loss.values.rot == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(loss.values.pos == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(loss.values.vel == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(loss.values.contact == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(loss.values.penetration == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(loss.values.smooth == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(loss.values.root == doctest::Approx(0.0).epsilon(1e-10));
  // saturated logits leave only float-noise in the cross-entropy term
  CHECK(loss.values.bce < 1e-6);
}

TEST_CASE("all loss components are non-negative on random outputs") {
  auto cfg = tiny_config();
  auto seq = make_seq(cfg, "chain5", "sine_wave", 12, 2);
  auto batch = make_window_batch<float>({{&seq, 0}}, cfg.window);
  Rng rng(5);
  Tensor pred = ad::randn<float>({cfg.window * batch.gt.N, repr::kOutWidth}, rng);
  ad::Tape t;
  CtxT<float> cx(t);
  LossWeights w;
  auto loss = reconstruction_loss(cx, t.constant(pred), batch.gt, w);
  for (double v : {loss.values.rot, loss.values.pos, loss.values.vel, loss.values.contact,
                   loss.values.penetration, loss.values.smooth, loss.values.bce,
                   loss.values.root, loss.values.total})
    CHECK(v >= 0.0);
}

TEST_CASE("penetration term matches the hand formula") {
  // one foot joint held 0.1 m below ground, unit weights
  auto cfg = tiny_config();
  auto seq = make_seq(cfg, "chain5", "static", 8, 3);
  // chain5 has one fallback contact joint (its single leaf)
  REQUIRE(seq.contact_joints.size() == 1);
  auto batch = make_window_batch<float>({{&seq, 0}}, cfg.window);
  const int foot = batch.gt.foot_nodes[0];

  Tensor out = outputs_from_gt(batch.gt);
  // drop the whole root trajectory by 0.1: every node sinks, the foot's
  // height relative to the gt ground drops to -0.1
  for (int f = 0; f < batch.gt.T; ++f)
    out.at(f * batch.gt.N + batch.gt.roots[0], 9) -= 0.1f;

  ad::Tape t;
  CtxT<float> cx(t);
  LossWeights w;
  w.w_penetration = 1.0;
  auto loss = reconstruction_loss(cx, t.constant(out), batch.gt, w);
  // foot sits exactly at ground level in the static pose, so depth = 0.1
  CHECK(loss.values.penetration ==
        doctest::Approx(0.01 * batch.gt.T / (batch.gt.foot_nodes.size() * batch.gt.T))
            .epsilon(1e-4));
}

TEST_CASE("constant-velocity trajectories have zero smoothness term") {
  auto cfg = tiny_config();
  auto seq = make_seq(cfg, "chain5", "static", 12, 4);
  auto batch = make_window_batch<float>({{&seq, 0}}, cfg.window);
  Tensor out = outputs_from_gt(batch.gt);
  for (int f = 0; f < batch.gt.T; ++f)
    out.at(f * batch.gt.N + batch.gt.roots[0], 8) = 0.03f;  // constant rz
  ad::Tape t;
  CtxT<float> cx(t);
  LossWeights w;
  auto loss = reconstruction_loss(cx, t.constant(out), batch.gt, w);
  CHECK(loss.values.smooth == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("loss is invariant under consistent joint relabeling") {
  auto cfg = tiny_config();
  auto seq = make_seq(cfg, "biped17", "walk_cycle", 16, 5);
  auto batch = make_window_batch<float>({{&seq, 2}}, cfg.window);
  Rng rng(6);
  Tensor pred = ad::randn<float>({cfg.window * batch.gt.N, repr::kOutWidth}, rng);

  // swap the two subtrees' node blocks via a topological-order-preserving
  // relabeling: swap a pair of sibling leaf nodes
  auto children_count = [&](int j) {
    int c = 0;
    for (int p : seq.parents)
      if (p == j) ++c;
    return c;
  };
  int a = -1, b = -1;
  for (int i = 0; i < seq.joint_count && b < 0; ++i)
    if (children_count(i) == 0 && seq.parents[i] >= 0) {
      if (a < 0) a = i;
      else if (seq.parents[i] == seq.parents[a]) b = i;
    }
  if (b < 0) {
    // fall back to any two leaves
    for (int i = seq.joint_count - 1; i >= 0 && b < 0; --i)
      if (children_count(i) == 0 && i != a) b = i;
  }
  REQUIRE(a >= 0);
  REQUIRE(b >= 0);

  repr::MotionGraphSequence seq2 = seq;
  std::swap(seq2.parents[a], seq2.parents[b]);
  for (auto& e : seq2.edges) {
    if (e.child == a) e.child = b;
    else if (e.child == b) e.child = a;
    if (e.parent == a) e.parent = b;
    else if (e.parent == b) e.parent = a;
  }
  std::swap(seq2.statics.x_global[a], seq2.statics.x_global[b]);
  std::swap(seq2.statics.x_local[a], seq2.statics.x_local[b]);
  std::swap(seq2.statics.x_text[a], seq2.statics.x_text[b]);
  for (auto& j : seq2.contact_joints) j = j == a ? b : (j == b ? a : j);
  for (auto& row : seq2.frames)
    for (int k = 0; k < repr::kDynWidth; ++k)
      std::swap(row[a * repr::kDynWidth + k], row[b * repr::kDynWidth + k]);

  auto batch2 = make_window_batch<float>({{&seq2, 2}}, cfg.window);
  Tensor pred2 = pred;
  for (int f = 0; f < cfg.window; ++f)
    for (int k = 0; k < repr::kOutWidth; ++k)
      std::swap(pred2.at(f * batch.gt.N + a, k), pred2.at(f * batch.gt.N + b, k));

  ad::Tape t;
  CtxT<float> cx(t);
  LossWeights w;
  auto l1 = reconstruction_loss(cx, t.constant(pred), batch.gt, w);
  auto l2 = reconstruction_loss(cx, t.constant(pred2), batch2.gt, w);
  CHECK(l1.values.total == doctest::Approx(l2.values.total).epsilon(1e-5));
}

TEST_CASE("epoch planning") {
  auto cfg = tiny_config();
  SUBCASE("one full-length clip gives exactly one window at 0") {
    auto seq = make_seq(cfg, "chain5", "static", cfg.window, 7);
    Rng rng(1);
    auto batches = plan_epoch({seq}, cfg.window, 1, rng);
    REQUIRE(batches.size() == 1);
    REQUIRE(batches[0].size() == 1);
    CHECK(batches[0][0].start == 0);
  }
  SUBCASE("empty dataset is rejected") {
    Rng rng(1);
    CHECK_THROWS_WITH_AS(plan_epoch({}, 8, 1, rng), doctest::Contains("EmptyDataset"), Error);
  }
}

TEST_CASE("short clips are loop-padded with frozen last frame") {
  auto cfg = tiny_config();
  auto seq = make_seq(cfg, "chain5", "sine_wave", 4, 8);  // shorter than window 6
  auto batch = make_window_batch<float>({{&seq, 0}}, cfg.window);
  const int N = batch.gt.N;
  for (int f = 4; f < cfg.window; ++f)
    for (int j = 0; j < N; ++j) {
      for (int k = 0; k < 6; ++k) {
        CHECK(batch.input.fm.at(f * N + j, repr::kQOff + k) ==
              batch.input.fm.at(3 * N + j, repr::kQOff + k));
        CHECK(batch.input.fm.at(f * N + j, repr::kVqOff + k) == 0.0f);
      }
      for (int k = 0; k < 3; ++k) CHECK(batch.input.fm.at(f * N + j, repr::kVxOff + k) == 0.0f);
      CHECK(batch.input.fm.at(f * N + j, repr::kROff + 0) == 0.0f);
      CHECK(batch.input.fm.at(f * N + j, repr::kROff + 1) == 0.0f);
      CHECK(batch.input.fm.at(f * N + j, repr::kROff + 2) == 0.0f);
    }
}

TEST_CASE("heterogeneous batching keeps graphs disjoint") {
  auto cfg = tiny_config();
  auto a = make_seq(cfg, "chain5", "static", 8, 9);
  auto b = make_seq(cfg, "quadruped13", "static", 8, 9);
  auto batch = make_window_batch<float>({{&a, 0}, {&b, 0}}, cfg.window);
  CHECK(batch.input.N == a.joint_count + b.joint_count);
  CHECK(batch.input.graphs() == 2);
  for (size_t e = 0; e < batch.input.edge_src.size(); ++e) {
    bool src_in_a = batch.input.edge_src[e] < a.joint_count;
    bool dst_in_a = batch.input.edge_dst[e] < a.joint_count;
    CHECK(src_in_a == dst_in_a);
  }
  for (int i = 0; i < a.joint_count; ++i)
    for (int j = a.joint_count; j < batch.input.N; ++j)
      CHECK(batch.input.attn_mask.at(i, j) == -1e9f);
}

TEST_CASE("fit determinism and zero-epoch behavior") {
  auto cfg = tiny_config();
  std::vector<repr::MotionGraphSequence> data = {make_seq(cfg, "chain5", "sine_wave", 10, 10),
                                                 make_seq(cfg, "chain5", "walk_cycle", 10, 11)};
  auto tmp = std::filesystem::temp_directory_path();

  SUBCASE("zero epochs returns the initialization") {
    FitSettings s;
    s.config = cfg;
    s.epochs = 0;
    s.seed = 5;
    auto m = fit(s, data);
    model::SataModel fresh(cfg);
    fresh.init(5);
    CHECK(ckpt::serialize_checkpoint(cfg, m->params) ==
          ckpt::serialize_checkpoint(cfg, fresh.params));
  }
  SUBCASE("same seed, same bytes") {
    FitSettings s;
    s.config = cfg;
    s.epochs = 3;
    s.batch_size = 2;
    s.seed = 6;
    auto m1 = fit(s, data);
    auto m2 = fit(s, data);
    CHECK(ckpt::serialize_checkpoint(cfg, m1->params) ==
          ckpt::serialize_checkpoint(cfg, m2->params));
  }
  SUBCASE("training log is written as one JSON object per epoch") {
    FitSettings s;
    s.config = cfg;
    s.epochs = 2;
    s.batch_size = 2;
    s.seed = 7;
    s.log_path = (tmp / "sata_fit_log.jsonl").string();
    FitReport rep;
    auto m = fit(s, data, &rep);
    CHECK(rep.steps == 2);
    std::string log = ckpt::read_text_file(s.log_path);
    int lines = 0;
    for (char c : log) lines += c == '\n';
    CHECK(lines == 2);
    CHECK(log.find("\"lr\"") != std::string::npos);
    std::filesystem::remove(s.log_path);
  }
}

TEST_CASE("rvq training keeps the codebook alive") {
  auto cfg = tiny_config();
  cfg.bottleneck.kind = model::BottleneckConfig::Kind::RVQ;
  std::vector<repr::MotionGraphSequence> data = {make_seq(cfg, "chain5", "sine_wave", 10, 12),
                                                 make_seq(cfg, "chain5", "walk_cycle", 10, 13)};
  FitSettings s;
  s.config = cfg;
  s.epochs = 4;
  s.batch_size = 2;
  s.seed = 8;
  FitReport rep;
  auto m = fit(s, data, &rep);
  CHECK(rep.codebook_utilization > 0.0);
}
