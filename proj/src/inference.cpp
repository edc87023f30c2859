#include "sata/inference.hpp"

#include "sata/training.hpp"

namespace sata::inference {

WindowPlan plan_windows(int frames, int window, int overlap, WindowPlan::Mode mode) {
  if (frames < 1) throw Error("InvalidConfig", "frames must be >= 1");
  if (overlap >= window || overlap < 0)
    throw Error("InvalidConfig", "overlap must satisfy 0 <= overlap < window");
  WindowPlan plan;
  plan.mode = mode;
  plan.overlap = overlap;
  int start = 0;
  while (true) {
    if (start + window >= frames) {
      plan.spans.emplace_back(std::max(0, frames - window), frames);
      break;
    }
    plan.spans.emplace_back(start, start + window);
    start += window - overlap;
  }
  return plan;
}

std::vector<std::vector<float>> stitch(
    const std::vector<std::vector<std::vector<float>>>& window_outputs,
    const WindowPlan& plan) {
  if (window_outputs.size() != plan.spans.size())
    throw Error("SpanMismatch", "window output count != plan span count");
  for (size_t k = 0; k < plan.spans.size(); ++k) {
    int len = plan.spans[k].second - plan.spans[k].first;
    if (static_cast<int>(window_outputs[k].size()) != len)
      throw Error("SpanMismatch", "window " + std::to_string(k) + " has wrong frame count");
  }
  const int T = plan.spans.back().second;
  std::vector<std::vector<float>> out(T);
  int cursor = 0;
  for (size_t k = 0; k < plan.spans.size(); ++k) {
    const auto [s, e] = plan.spans[k];
    for (int f = s; f < e; ++f) {
      const auto& row = window_outputs[k][f - s];
      if (f >= cursor) {
        out[f] = row;
      } else if (plan.mode == WindowPlan::Mode::Blend) {
        // linear cross-fade across the actual intersection [s, cursor)
        int L = cursor - s;
        float w_later = static_cast<float>(f - s + 1) / static_cast<float>(L + 1);
        for (size_t c = 0; c < row.size(); ++c)
          out[f][c] = (1.0f - w_later) * out[f][c] + w_later * row[c];
      }
      // crop mode: the earlier window keeps overlapping frames
    }
    cursor = e;
  }
  return out;
}

repr::MotionGraphSequence sequence_for_model(const bvh::MotionClip& canonical_clip,
                                             const sem::TagDictionary& tags,
                                             const model::ModelConfig& cfg,
                                             const PipelineOptions& opt) {
  auto descriptions = sem::resolve_descriptions(canonical_clip.skeleton, tags);
  std::vector<std::vector<float>> embeddings;
  if (opt.provider != nullptr) {
    if (opt.provider->dimension() != cfg.d_text)
      throw Error("DimensionMismatch", "embedding provider dimension " +
                                           std::to_string(opt.provider->dimension()) +
                                           " != model d_text " + std::to_string(cfg.d_text));
    embeddings = sem::embed_all(descriptions, *opt.provider);
  } else {
    sem::HashEmbeddingProvider hash(cfg.d_text, opt.embed_seed);
    embeddings = sem::embed_all(descriptions, hash);
  }
  auto contact = sem::contact_joint_set(canonical_clip.skeleton, descriptions);
  return repr::build_sequence(canonical_clip, embeddings, contact);
}

namespace {

PipelineResult run_pipeline(const bvh::MotionClip& source, const sem::TagDictionary& source_tags,
                            const bvh::Skeleton& target, const sem::TagDictionary& target_tags,
                            model::SataModel& m, const PipelineOptions& opt) {
  bvh::MotionClip canon = kin::canonicalize(source);
  repr::MotionGraphSequence src_seq = sequence_for_model(canon, source_tags, m.cfg, opt);

  // Target statics: a one-frame rest clip carries the skeleton through the
  // same extraction path.
  bvh::MotionClip target_rest;
  target_rest.skeleton = target;
  target_rest.frame_time = source.frame_time;
  target_rest.root_positions.emplace_back(0, 0, 0);
  target_rest.rotations.emplace_back(target.joint_count(), Eigen::Quaterniond::Identity());
  repr::MotionGraphSequence tgt_seq = sequence_for_model(target_rest, target_tags, m.cfg, opt);

  const int T = src_seq.frame_count();
  WindowPlan plan = plan_windows(T, m.cfg.window, m.cfg.overlap, opt.stitch_mode);

  auto tgt_statics = model::graph_statics_from<float>(tgt_seq);
  const int J_out = tgt_seq.joint_count;

  std::vector<std::vector<std::vector<float>>> window_outputs;
  window_outputs.reserve(plan.spans.size());
  for (const auto& [s, e] : plan.spans) {
    const int Tw = e - s;
    auto batch = training::make_window_batch<float>({{&src_seq, s}}, Tw);
    ad::Tape tape;
    model::CtxT<float> cx(tape);
    cx.train = false;
    auto lat = m.encode(cx, batch.input);
    std::vector<model::Var> dec_in;
    for (model::Var pre : lat) {
      if (m.cfg.bottleneck.kind == model::BottleneckConfig::Kind::VAE)
        dec_in.push_back(m.bottleneck_vae(cx, pre).sample);  // mu at inference
      else
        dec_in.push_back(m.bottleneck_rvq(cx, pre).quantized);
    }
    auto tgt_input = model::batch_graphs<float>({tgt_statics}, Tw);
    model::Var out = m.decode(cx, dec_in, tgt_input);
    const auto& ov = tape.val(out);
    std::vector<std::vector<float>> frames(Tw, std::vector<float>(J_out * repr::kOutWidth));
    for (int f = 0; f < Tw; ++f)
      for (int j = 0; j < J_out; ++j)
        for (int c = 0; c < repr::kOutWidth; ++c)
          frames[f][j * repr::kOutWidth + c] = ov.at(f * J_out + j, c);
    window_outputs.push_back(std::move(frames));
  }

  auto rows = stitch(window_outputs, plan);
  auto rec = repr::recover_motion(rows, target, source.frame_time);
  return {std::move(rec.clip), std::move(rec.contacts), rec.degenerate_sixd_count};
}

}  // namespace

PipelineResult reconstruct(const bvh::MotionClip& clip, const sem::TagDictionary& tags,
                           model::SataModel& m, const PipelineOptions& opt) {
  return run_pipeline(clip, tags, clip.skeleton, tags, m, opt);
}

PipelineResult retarget(const bvh::MotionClip& source, const sem::TagDictionary& source_tags,
                        const bvh::Skeleton& target, const sem::TagDictionary& target_tags,
                        model::SataModel& m, const PipelineOptions& opt) {
  return run_pipeline(source, source_tags, target, target_tags, m, opt);
}

}  // namespace sata::inference
