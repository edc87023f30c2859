#pragma once

#include "sata/model.hpp"
#include "sata/semantics.hpp"

namespace sata::inference {

struct WindowPlan {
  enum class Mode { Crop, Blend };
  std::vector<std::pair<int, int>> spans;  // [start, end)
  Mode mode = Mode::Crop;
  int overlap = 0;
};

// Overlapping sliding windows: starts step by window-overlap, the final
// window is end-aligned, inputs shorter than a window get one natural-length
// span.
WindowPlan plan_windows(int frames, int window = 64, int overlap = 16,
                        WindowPlan::Mode mode = WindowPlan::Mode::Crop);

// Merges per-window output rows into exactly `frames` rows. Crop: the earlier
// window owns overlapping frames. Blend: linear cross-fade with weight
// (i+1)/(L+1) for the later window across an overlap of length L.
std::vector<std::vector<float>> stitch(
    const std::vector<std::vector<std::vector<float>>>& window_outputs,
    const WindowPlan& plan);

struct PipelineOptions {
  WindowPlan::Mode stitch_mode = WindowPlan::Mode::Crop;
  uint64_t embed_seed = 0;
  // optional table provider; the hash provider (dimension = config d_text)
  // is used when null
  const sem::EmbeddingProvider* provider = nullptr;
};

struct PipelineResult {
  bvh::MotionClip clip;
  std::vector<std::vector<float>> contacts;
  int degenerate_sixd_count = 0;
};

// canonicalize -> extract -> windowed encode/decode -> stitch -> recover.
PipelineResult reconstruct(const bvh::MotionClip& clip, const sem::TagDictionary& tags,
                           model::SataModel& m, const PipelineOptions& opt = {});

// Encodes with source statics and decodes onto the target skeleton's rest
// geometry and semantics; output frame count equals the source's.
PipelineResult retarget(const bvh::MotionClip& source, const sem::TagDictionary& source_tags,
                        const bvh::Skeleton& target, const sem::TagDictionary& target_tags,
                        model::SataModel& m, const PipelineOptions& opt = {});

// Embeddings + contact set + graph sequence for one clip under a model
// config; shared by the pipelines, training data preparation, and the CLI.
repr::MotionGraphSequence sequence_for_model(const bvh::MotionClip& canonical_clip,
                                             const sem::TagDictionary& tags,
                                             const model::ModelConfig& cfg,
                                             const PipelineOptions& opt);

}  // namespace sata::inference
