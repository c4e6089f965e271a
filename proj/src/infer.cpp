#include "fixsal/infer.hpp"

#include <cmath>

#include "fixsal/log.hpp"
#include "fixsal/numerics.hpp"
#include "fixsal/slq.hpp"

namespace fixsal {

void InferConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("infer.threshold: must lie in [0,1]");
}

double match_score(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("match_score: embedding sizes differ");
  if (norm(a.data()) < 1e-12 || norm(b.data()) < 1e-12) {
    throw DegenerateInputError("match_score: zero-norm embedding");
  }
  return (cosine(a.data(), b.data()) + 1.0) / 2.0;
}

std::size_t most_confident_query(const Tensor& masks) {
  if (masks.rank() != 2) throw ShapeError("masks must be N x HW");
  std::size_t best = 0;
  double best_margin = -1.0;
  for (std::size_t i = 0; i < masks.dim(0); ++i) {
    double margin = 0.0;
    for (float m : masks.row(i)) margin += std::abs(2.0 * m - 1.0);
    margin /= double(masks.dim(1));
    if (margin > best_margin) {
      best_margin = margin;
      best = i;
    }
  }
  return best;
}

FramePrediction infer_frame(const FrameSample& frame, const ModelParams& params, InferenceBank& bank,
                            const InferConfig& cfg) {
  FramePrediction out;
  const std::size_t h = frame.gt_mask.rank() == 2 ? frame.gt_mask.dim(0) : 1;
  const std::size_t w = frame.gt_mask.size() / h;
  try {
    const Tensor queries = frame_queries(frame, params);
    const Tensor masks = query_masks(frame.features, queries, params.mask_head);
    const std::size_t idx = most_confident_query(masks);
    out.selected_query = idx;
    out.mask = Tensor({h, w}, std::vector<float>(masks.row(idx).begin(), masks.row(idx).end()));
    out.embedding = l2_normalize(Tensor::vector(std::vector<float>(queries.row(idx).begin(), queries.row(idx).end())));

    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t j = 0; j < bank.entries.size(); ++j) {
      const double f = match_score(out.embedding, bank.entries[j]);
      if (f > best_score) {
        best_score = f;
        best = j;
      }
    }
    out.confidence = bank.entries.empty() ? 0.0 : best_score;
    if (!bank.entries.empty() && out.confidence > cfg.threshold) {
      out.matched_index = best;
    } else if (bank.max_size == 0 || bank.entries.size() < bank.max_size) {
      bank.entries.push_back(out.embedding);
    } else {
      log_warn("inference bank full; prediction not stored");
    }
  } catch (const DegenerateInputError& e) {
    out = FramePrediction{};
    out.mask = Tensor({h, w});
    out.skipped = true;
    out.reason = e.what();
    log_warn(std::string("inference frame skipped: ") + e.what());
  }
  out.bank_size = bank.size();
  return out;
}

std::vector<FramePrediction> infer_video(const VideoSample& video, const ModelParams& params,
                                         const InferConfig& cfg) {
  cfg.validate();
  if (video.frames.empty()) throw ConfigError("infer_video: video has no frames");
  InferenceBank bank;
  bank.max_size = cfg.max_bank;
  std::vector<FramePrediction> out;
  out.reserve(video.frames.size());
  for (const FrameSample& frame : video.frames) out.push_back(infer_frame(frame, params, bank, cfg));
  return out;
}

EvalReport evaluate_videos(const std::vector<VideoSample>& videos, const ModelParams& params,
                           const InferConfig& cfg) {
  EvalReport report;
  for (const VideoSample& v : videos) {
    const auto preds = infer_video(v, params, cfg);
    for (std::size_t i = 0; i < preds.size(); ++i) report.add(preds[i].mask, v.frames[i].gt_mask);
  }
  report.finalize();
  return report;
}

}  // namespace fixsal
