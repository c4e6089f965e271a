#include "fixsal/slq.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fixsal/numerics.hpp"

namespace fixsal {

FeatureView feature_view(const Tensor& features) {
  if (features.rank() == 3) {
    return {features.dim(0), features.dim(1) * features.dim(2), features.data()};
  }
  if (features.rank() == 2) return {features.dim(0), features.dim(1), features.data()};
  throw ShapeError("feature map must be C x H x W or C x HW, got " + features.shape_string());
}

namespace {

void require_pixels(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + " has " + std::to_string(got) + " pixels, expected " +
                     std::to_string(want));
  }
}

// Attention output for the columns listed in `targets` of the (C x HW) map `g`.
std::vector<double> attend_columns(const std::vector<double>& g, std::size_t c, std::size_t hw,
                                   const std::vector<std::size_t>& targets) {
  const double scale = 1.0 / std::sqrt(double(c));
  std::vector<double> out(c * targets.size());
  std::vector<double> logits(hw);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const std::size_t p = targets[t];
    for (std::size_t j = 0; j < hw; ++j) logits[j] = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double gp = g[ch * hw + p];
      const double* row = &g[ch * hw];
      for (std::size_t j = 0; j < hw; ++j) logits[j] += gp * row[j];
    }
    double mx = -INFINITY;
    for (auto& l : logits) {
      l *= scale;
      mx = std::max(mx, l);
    }
    double sum = 0.0;
    for (auto& l : logits) {
      l = std::exp(l - mx);
      sum += l;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* row = &g[ch * hw];
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) acc += logits[j] * row[j];
      out[t * c + ch] = row[p] + acc / sum;
    }
  }
  return out;
}

}  // namespace

Tensor nonlocal_propagate(const Tensor& features) {
  const FeatureView f = feature_view(features);
  std::vector<double> g(f.data.begin(), f.data.end());
  std::vector<std::size_t> all(f.pixels);
  for (std::size_t p = 0; p < f.pixels; ++p) all[p] = p;
  const auto y = attend_columns(g, f.channels, f.pixels, all);
  Tensor out({f.channels, f.pixels});
  for (std::size_t p = 0; p < f.pixels; ++p)
    for (std::size_t ch = 0; ch < f.channels; ++ch) out.at(ch, p) = static_cast<float>(y[p * f.channels + ch]);
  return out;
}

Tensor scribble_feature(const Tensor& features, const Tensor& scribble) {
  const FeatureView f = feature_view(features);
  require_pixels(scribble.size(), f.pixels, "scribble");
  std::vector<std::size_t> targets;
  std::vector<double> g(f.channels * f.pixels);
  for (std::size_t p = 0; p < f.pixels; ++p) {
    const double m = scribble[p];
    if (m > 0.5) targets.push_back(p);
    for (std::size_t ch = 0; ch < f.channels; ++ch) {
      const double v = f.data[ch * f.pixels + p];
      g[ch * f.pixels + p] = v * m + v;
    }
  }
  if (targets.empty()) throw DegenerateInputError("scribble has no labeled pixels");
  // Only the scribbled columns of NLocal(G) enter the average.
  const auto y = attend_columns(g, f.channels, f.pixels, targets);
  Tensor out({f.channels});
  for (std::size_t ch = 0; ch < f.channels; ++ch) {
    double acc = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) acc += y[t * f.channels + ch];
    out[ch] = static_cast<float>(acc / double(targets.size()));
  }
  return out;
}

Tensor mask_logits(const Tensor& features, std::span<const float> query, const MaskHeadParams& head) {
  const FeatureView f = feature_view(features);
  const Tensor& proj = head.projection;
  if (proj.rank() != 2 || proj.dim(0) != f.channels || proj.dim(1) != query.size()) {
    throw ShapeError("mask head projection " + proj.shape_string() + " incompatible with C=" +
                     std::to_string(f.channels) + ", d=" + std::to_string(query.size()));
  }
  std::vector<double> w(f.channels);
  for (std::size_t ch = 0; ch < f.channels; ++ch) w[ch] = dot(proj.row(ch), query);
  std::vector<double> z(f.pixels, 0.0);
  for (std::size_t ch = 0; ch < f.channels; ++ch) {
    const float* row = f.data.data() + ch * f.pixels;
    for (std::size_t p = 0; p < f.pixels; ++p) z[p] += w[ch] * double(row[p]);
  }
  const double scale = 1.0 / std::sqrt(double(f.channels));
  Tensor out({f.pixels});
  for (std::size_t p = 0; p < f.pixels; ++p) out[p] = static_cast<float>(z[p] * scale);
  return out;
}

Tensor mask_head(const Tensor& features, std::span<const float> query, const MaskHeadParams& head) {
  return sigmoid(mask_logits(features, query, head));
}

Tensor query_feature(const Tensor& features, const Tensor& mask) {
  const FeatureView f = feature_view(features);
  require_pixels(mask.size(), f.pixels, "mask");
  double total = 0.0;
  for (float m : mask.data()) total += m;
  if (!(total >= 1e-8)) throw DegenerateInputError("query mask has no mass");
  Tensor out({f.channels});
  for (std::size_t ch = 0; ch < f.channels; ++ch) {
    out[ch] = static_cast<float>(dot(f.data.subspan(ch * f.pixels, f.pixels), mask.data()) / total);
  }
  return out;
}

namespace {
Tensor rectified_projection(const Tensor& x, const ProjectorParams& proj) {
  const Tensor& w = proj.weight;
  if (w.rank() != 2 || w.dim(1) != x.size()) throw ShapeError("projector weight incompatible with feature size");
  Tensor out({w.dim(0)});
  for (std::size_t i = 0; i < w.dim(0); ++i) out[i] = static_cast<float>(std::max(0.0, dot(w.row(i), x.data())));
  return out;
}
}  // namespace

double semantic_score(const Tensor& scribble_feat, const Tensor& query_feat, const ProjectorParams& proj) {
  if (scribble_feat.size() != query_feat.size()) throw ShapeError("semantic score inputs differ in length");
  const Tensor a = rectified_projection(scribble_feat, proj);
  const Tensor b = rectified_projection(query_feat, proj);
  if (norm(a.data()) == 0.0 || norm(b.data()) == 0.0) return 0.0;
  return cosine(a, b);
}

double partial_iou(std::span<const float> pred, std::span<const float> scribble) {
  if (pred.size() != scribble.size()) throw ShapeError("partial IoU inputs differ in size");
  double inter = 0.0, area = 0.0;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    inter += double(pred[p]) * double(scribble[p]);
    area += scribble[p];
  }
  if (!(area > 0)) throw DegenerateInputError("partial IoU against an empty scribble");
  return std::clamp(inter / area, 0.0, 1.0);
}

double locality_score(std::span<const float> fg_mask, const Tensor& scribble_fg, const Tensor& scribble_bg) {
  std::vector<float> bg(fg_mask.size());
  for (std::size_t p = 0; p < fg_mask.size(); ++p) bg[p] = 1.0f - fg_mask[p];
  return partial_iou(fg_mask, scribble_fg.data()) + partial_iou(bg, scribble_bg.data());
}

Tensor query_masks(const Tensor& features, const Tensor& queries, const MaskHeadParams& head) {
  const FeatureView f = feature_view(features);
  if (queries.rank() != 2) throw ShapeError("queries must be N x d");
  const std::size_t n = queries.dim(0);
  Tensor masks({n, f.pixels});
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor m = mask_head(features, queries.row(i), head);
    std::copy(m.data().begin(), m.data().end(), masks.row(i).begin());
  }
  return masks;
}

QuerySet score_masks(const Tensor& features, const Tensor& masks, const Tensor& scribble_feat,
                     const Tensor& scribble_fg, const Tensor& scribble_bg, const ProjectorParams& proj) {
  const FeatureView f = feature_view(features);
  if (masks.rank() != 2 || masks.dim(1) != f.pixels) throw ShapeError("masks must be N x HW");
  require_pixels(scribble_fg.size(), f.pixels, "foreground scribble");
  require_pixels(scribble_bg.size(), f.pixels, "background scribble");
  const std::size_t n = masks.dim(0);
  QuerySet qs;
  qs.masks = masks;
  qs.features = Tensor({n, f.channels});
  qs.scores_sem = Tensor({n});
  qs.scores_loc = Tensor({n});
  qs.scores_total = Tensor({n});
  qs.totals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor m = Tensor({f.pixels}, std::vector<float>(masks.row(i).begin(), masks.row(i).end()));
    const Tensor fq = query_feature(features, m);
    std::copy(fq.data().begin(), fq.data().end(), qs.features.row(i).begin());
    const double sem = semantic_score(scribble_feat, fq, proj);
    const double loc = locality_score(m.data(), scribble_fg, scribble_bg);
    qs.scores_sem[i] = static_cast<float>(sem);
    qs.scores_loc[i] = static_cast<float>(loc);
    qs.scores_total[i] = static_cast<float>(sem + loc);
    qs.totals[i] = sem + loc;
  }
  return qs;
}

QuerySet score_queries(const Tensor& features, const Tensor& queries, const MaskHeadParams& head,
                       const Tensor& scribble_feat, const Tensor& scribble_fg, const Tensor& scribble_bg,
                       const ProjectorParams& proj) {
  QuerySet qs = score_masks(features, query_masks(features, queries, head), scribble_feat, scribble_fg,
                            scribble_bg, proj);
  qs.embeddings = queries;
  return qs;
}

Selection select_query(const QuerySet& qs) {
  const std::size_t n = qs.size();
  if (n == 0) throw ShapeError("cannot select from an empty query set");
  const bool exact = qs.totals.size() == n;
  auto total = [&](std::size_t i) { return exact ? qs.totals[i] : double(qs.scores_total[i]); };
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (total(i) > total(best)) best = i;
  }
  Selection sel;
  sel.index = best;
  if (!qs.embeddings.empty()) {
    sel.query = Tensor::vector(std::vector<float>(qs.embeddings.row(best).begin(), qs.embeddings.row(best).end()));
  }
  return sel;
}

}  // namespace fixsal
