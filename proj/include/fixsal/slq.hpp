#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fixsal/tensor.hpp"

namespace fixsal {

// Query competitor: every candidate query is scored by how well its pooled
// feature matches the scribbled foreground (semantic score) and by how well its
// mask agrees with the scribbles (locality score); the best query wins.
//
// Feature maps are C x H x W (or C x HW); masks are H x W (or any shape with HW
// elements). Pixel order is row-major throughout.

struct ProjectorParams {
  Tensor weight;  // d_proj x C, followed by ReLU
};

struct MaskHeadParams {
  Tensor projection;  // C x d
};

/// Parameter-free non-local block with residual: Y = F + F softmax_rows(F^T F / sqrt(C))^T.
Tensor nonlocal_propagate(const Tensor& features);

/// Scribble-region embedding: NLocal(F * M + F), averaged over scribble pixels.
Tensor scribble_feature(const Tensor& features, const Tensor& scribble);

/// Per-pixel logits (P q)^T F / sqrt(C), length HW.
Tensor mask_logits(const Tensor& features, std::span<const float> query, const MaskHeadParams& head);
Tensor mask_head(const Tensor& features, std::span<const float> query, const MaskHeadParams& head);

/// Mask-weighted mean feature column (F M^T) / sum(M).
Tensor query_feature(const Tensor& features, const Tensor& mask);

/// Cosine of the rectified projections; 0 when either projection vanishes.
double semantic_score(const Tensor& scribble_feat, const Tensor& query_feat, const ProjectorParams& proj);

/// sum(M_pre * M_scr) / sum(M_scr), in [0,1]. Equals |M_pre n M_scr| / |M_scr| for binary M_pre.
double partial_iou(std::span<const float> pred, std::span<const float> scribble);
inline double partial_iou(const Tensor& pred, const Tensor& scribble) {
  return partial_iou(pred.data(), scribble.data());
}

/// partial_iou(M_fg, S_fg) + partial_iou(1 - M_fg, S_bg), in [0,2].
double locality_score(std::span<const float> fg_mask, const Tensor& scribble_fg, const Tensor& scribble_bg);
inline double locality_score(const Tensor& fg_mask, const Tensor& scribble_fg, const Tensor& scribble_bg) {
  return locality_score(fg_mask.data(), scribble_fg, scribble_bg);
}

struct QuerySet {
  Tensor embeddings;    // N x d (may be empty when scoring bare masks)
  Tensor masks;         // N x HW
  Tensor features;      // N x C
  Tensor scores_sem;    // N
  Tensor scores_loc;    // N
  Tensor scores_total;  // N
  std::vector<double> totals;  // unrounded sem + loc; selection uses these when present

  std::size_t size() const { return masks.empty() ? 0 : masks.dim(0); }
};

/// Scores candidate masks directly (rows of `masks`, N x HW).
QuerySet score_masks(const Tensor& features, const Tensor& masks, const Tensor& scribble_feat,
                     const Tensor& scribble_fg, const Tensor& scribble_bg, const ProjectorParams& proj);

/// Runs the mask head for every query row and scores the resulting masks.
QuerySet score_queries(const Tensor& features, const Tensor& queries, const MaskHeadParams& head,
                       const Tensor& scribble_feat, const Tensor& scribble_fg, const Tensor& scribble_bg,
                       const ProjectorParams& proj);

/// All N x HW masks for the given queries.
Tensor query_masks(const Tensor& features, const Tensor& queries, const MaskHeadParams& head);

struct Selection {
  std::size_t index = 0;
  Tensor query;  // winning embedding (empty if the set had no embeddings)
};

/// argmax of scores_total; ties go to the lowest index.
Selection select_query(const QuerySet& qs);

/// Feature map viewed as (channels, pixels).
struct FeatureView {
  std::size_t channels;
  std::size_t pixels;
  std::span<const float> data;
};
FeatureView feature_view(const Tensor& features);

}  // namespace fixsal
