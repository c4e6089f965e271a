#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fixsal/metrics.hpp"
#include "fixsal/scenegen.hpp"
#include "fixsal/tensor.hpp"
#include "fixsal/trainer.hpp"

namespace fixsal {

struct InferConfig {
  double threshold = 0.1;    // matches need confidence strictly above this
  std::size_t max_bank = 0;  // 0 = unbounded
  void validate() const;
};

/// Per-video store of predicted query embeddings. Starts empty, append-only.
struct InferenceBank {
  std::vector<Tensor> entries;
  std::size_t max_size = 0;  // 0 = unbounded
  std::size_t size() const { return entries.size(); }
};

struct FramePrediction {
  Tensor mask;  // H x W in [0,1]
  Tensor embedding;
  std::optional<std::size_t> matched_index;
  double confidence = 0.0;
  std::size_t selected_query = 0;
  std::size_t bank_size = 0;  // after this frame
  bool skipped = false;
  std::string reason;
};

/// (cos + 1) / 2 in [0,1].
double match_score(const Tensor& a, const Tensor& b);

/// Index of the query whose mask has the largest mean |2M - 1|; ties to the lowest index.
std::size_t most_confident_query(const Tensor& masks);

FramePrediction infer_frame(const FrameSample& frame, const ModelParams& params, InferenceBank& bank,
                            const InferConfig& cfg = {});

std::vector<FramePrediction> infer_video(const VideoSample& video, const ModelParams& params,
                                         const InferConfig& cfg = {});

/// Runs infer_video on every video and scores the masks against ground truth.
EvalReport evaluate_videos(const std::vector<VideoSample>& videos, const ModelParams& params,
                           const InferConfig& cfg = {});

}  // namespace fixsal
