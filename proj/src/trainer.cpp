#include "fixsal/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "fixsal/log.hpp"
#include "fixsal/numerics.hpp"
#include "fixsal/pse.hpp"

namespace fixsal {

void IimcConfig::validate() const {
  if (!(tau > 0)) throw ConfigError("iimc.tau: must be positive");
  if (frame_bank_capacity == 0) throw ConfigError("iimc.frame_bank_capacity: must be positive");
  if (video_bank_capacity == 0) throw ConfigError("iimc.video_bank_capacity: must be positive");
}

void TrainConfig::validate() const {
  if (!(lr >= 0)) throw ConfigError("train.lr: must be non-negative");
  if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay: must be non-negative");
  if (!(lambda_intra >= 0)) throw ConfigError("train.lambda_intra: must be non-negative");
  if (!(lambda_inter >= 0)) throw ConfigError("train.lambda_inter: must be non-negative");
  if (!(lambda_pce >= 0)) throw ConfigError("train.lambda_pce: must be non-negative");
  if (ref_window == 0) throw ConfigError("train.ref_window: must be at least 1");
  if (n_queries == 0) throw ConfigError("train.n_queries: must be positive");
  if (embed_dim == 0 || embed_dim % 4 != 0) throw ConfigError("train.embed_dim: must be a positive multiple of 4");
  if (proj_dim == 0) throw ConfigError("train.proj_dim: must be positive");
  if (log_every == 0) throw ConfigError("train.log_every: must be positive");
  iimc.validate();
}

std::size_t TrainConfig::effective_lr_drop() const {
  return lr_drop_iter < 0 ? (iterations * 2) / 3 : static_cast<std::size_t>(lr_drop_iter);
}

namespace {

Tensor gaussian_tensor(std::vector<std::size_t> dims, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  Tensor t(std::move(dims));
  for (auto& v : t.data()) v = static_cast<float>(gauss(rng));
  return t;
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.dims()); }

Tensor to_tensor(const std::vector<double>& v) {
  Tensor t({v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

}  // namespace

ModelParams init_params(std::size_t channels, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.embed_dim;
  ModelParams p;
  p.use_pos = cfg.use_pos;
  p.use_sem = cfg.use_sem;
  p.e_sem = cfg.use_sem ? init_semantic_embedding(d, cfg.seed) : Tensor({d});
  p.mask_head.projection = gaussian_tensor({channels, d}, 1.0 / std::sqrt(double(d)), derive_seed(cfg.seed, 0x3a5c));
  p.projector.weight =
      gaussian_tensor({cfg.proj_dim, channels}, 1.0 / std::sqrt(double(channels)), derive_seed(cfg.seed, 0x960));
  p.query_offsets = query_offsets(cfg.n_queries, d, cfg.seed);
  p.m_e_sem = zeros_like(p.e_sem);
  p.v_e_sem = zeros_like(p.e_sem);
  p.m_mask_head = zeros_like(p.mask_head.projection);
  p.v_mask_head = zeros_like(p.mask_head.projection);
  p.m_projector = zeros_like(p.projector.weight);
  p.v_projector = zeros_like(p.projector.weight);
  return p;
}

void adamw_step(ModelParams& params, const ParamGrads& grads, const TrainConfig& cfg, std::size_t t) {
  struct Slot {
    Tensor* param;
    const Tensor* grad;
    Tensor* m;
    Tensor* v;
    bool frozen;
  };
  const Slot slots[] = {
      {&params.e_sem, &grads.e_sem, &params.m_e_sem, &params.v_e_sem, !params.use_sem},
      {&params.mask_head.projection, &grads.mask_head, &params.m_mask_head, &params.v_mask_head, false},
      {&params.projector.weight, &grads.projector, &params.m_projector, &params.v_projector, false},
  };
  for (const Slot& s : slots) {
    if (s.grad->dims() != s.param->dims()) throw ShapeError("gradient shape does not match its parameter");
    require_finite(*s.grad, "gradient");
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double lr = t >= cfg.effective_lr_drop() ? cfg.lr / 10.0 : cfg.lr;
  const double c1 = 1.0 - std::pow(b1, double(t + 1));
  const double c2 = 1.0 - std::pow(b2, double(t + 1));
  for (const Slot& s : slots) {
    if (s.frozen) continue;
    for (std::size_t i = 0; i < s.param->size(); ++i) {
      const double g = (*s.grad)[i];
      const double m = b1 * (*s.m)[i] + (1 - b1) * g;
      const double v = b2 * (*s.v)[i] + (1 - b2) * g * g;
      (*s.m)[i] = static_cast<float>(m);
      (*s.v)[i] = static_cast<float>(v);
      double p = (*s.param)[i];
      p *= 1.0 - lr * cfg.weight_decay;
      p -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
      (*s.param)[i] = static_cast<float>(p);
    }
  }
  params.adam_steps = t + 1;
}

Tensor frame_queries(const FrameSample& frame, const ModelParams& params) {
  const std::size_t d = params.embed_dim();
  Tensor e_pos({d});
  if (params.use_pos) {
    const Point2 c = fixation_centroid_or_center(frame.fixation);
    e_pos = positional_encoding_2d(c.x, c.y, d);
  }
  const Tensor e_sem = params.use_sem ? params.e_sem : Tensor({d});
  return add_offsets(init_queries(e_pos, e_sem, params.n_queries()), params.query_offsets);
}

std::size_t sample_ref_index(std::size_t n_frames, std::size_t key_idx, std::size_t window, std::mt19937_64& rng) {
  if (n_frames < 2) throw DegenerateInputError("a reference frame needs a video of at least 2 frames");
  if (key_idx >= n_frames) throw ShapeError("key index out of range");
  const std::size_t lo = key_idx >= window ? key_idx - window : 0;
  const std::size_t hi = std::min(n_frames - 1, key_idx + window);
  // Draw from the hi - lo candidates excluding the key itself.
  const std::size_t r = std::uniform_int_distribution<std::size_t>(0, hi - lo - 1)(rng);
  const std::size_t idx = lo + r;
  return idx >= key_idx ? idx + 1 : idx;
}

std::pair<const FrameSample*, const FrameSample*> sample_pair(const VideoSample& video, std::size_t key_idx,
                                                              std::size_t window, std::mt19937_64& rng) {
  const std::size_t ref = sample_ref_index(video.frames.size(), key_idx, window, rng);
  return {&video.frames[key_idx], &video.frames[ref]};
}

namespace {

constexpr double kLogitClamp = 80.0;

struct ScribblePixels {
  std::vector<std::size_t> index;
  std::vector<double> target;
};

ScribblePixels scribble_pixels(const Tensor& fg, const Tensor& bg, std::size_t pixels) {
  if (fg.size() != pixels || bg.size() != pixels) throw ShapeError("scribble size does not match the mask");
  ScribblePixels s;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (fg[p] > 0.5f) {
      s.index.push_back(p);
      s.target.push_back(1.0);
    }
    if (bg[p] > 0.5f) {
      s.index.push_back(p);
      s.target.push_back(0.0);
    }
  }
  if (s.index.empty()) throw DegenerateInputError("partial cross-entropy needs at least one scribbled pixel");
  return s;
}

// BCE-with-logits over the listed pixels; writes d(loss)/d(logit) into `grad`.
double pce_kernel(std::span<const double> logits, const ScribblePixels& s, std::span<double> grad) {
  const double inv = 1.0 / double(s.index.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < s.index.size(); ++k) {
    const std::size_t p = s.index[k];
    const double z = std::clamp(logits[p], -kLogitClamp, kLogitClamp);
    loss += softplus(z) - s.target[k] * z;
    grad[p] += (sigmoid(z) - s.target[k]) * inv;
  }
  return loss * inv;
}

// Double-precision forward state of one frame for the selected query.
struct FrameGraph {
  std::size_t selected = 0;
  std::vector<double> q, w, m;
  double pce = 0.0;
  std::vector<double> dz;  // accumulates d(total)/d(logit)
  std::vector<double> fg, bg;  // possibly normalized
  double fg_norm = 1.0, bg_norm = 1.0;
  std::vector<double> q_unit;
  double q_norm = 1.0;
  double mask_mae = 0.0;
};

std::size_t competitor_choice(const FrameSample& frame, const Tensor& queries, const ModelParams& params) {
  const Tensor scr_feat = scribble_feature(frame.features, frame.scribble_fg);
  const QuerySet qs = score_queries(frame.features, queries, params.mask_head, scr_feat, frame.scribble_fg,
                                    frame.scribble_bg, params.projector);
  return select_query(qs).index;
}

FrameGraph forward_frame(const FrameSample& frame, const ModelParams& params, std::size_t selected,
                         bool normalize) {
  const FeatureView f = feature_view(frame.features);
  const std::size_t c = f.channels, hw = f.pixels, d = params.embed_dim();
  if (params.channels() != c) throw ShapeError("model channel count does not match the frame features");
  FrameGraph g;
  g.selected = selected;

  g.q.assign(d, 0.0);
  if (params.use_pos) {
    const Point2 ctr = fixation_centroid_or_center(frame.fixation);
    const Tensor e_pos = positional_encoding_2d(ctr.x, ctr.y, d);
    for (std::size_t j = 0; j < d; ++j) g.q[j] += e_pos[j];
  }
  if (params.use_sem) {
    for (std::size_t j = 0; j < d; ++j) g.q[j] += params.e_sem[j];
  }
  const auto off = params.query_offsets.row(selected);
  for (std::size_t j = 0; j < d; ++j) g.q[j] += off[j];

  const Tensor& proj = params.mask_head.projection;
  g.w.assign(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto row = proj.row(ch);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += double(row[j]) * g.q[j];
    g.w[ch] = acc;
  }
  std::vector<double> z(hw, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* row = f.data.data() + ch * hw;
    for (std::size_t p = 0; p < hw; ++p) z[p] += g.w[ch] * double(row[p]);
  }
  const double scale = 1.0 / std::sqrt(double(c));
  g.m.resize(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    z[p] *= scale;
    g.m[p] = sigmoid(z[p]);
  }

  g.dz.assign(hw, 0.0);
  const ScribblePixels scr = scribble_pixels(frame.scribble_fg, frame.scribble_bg, hw);
  std::vector<double> dpce(hw, 0.0);
  g.pce = pce_kernel(z, scr, dpce);
  g.dz = std::move(dpce);  // scaled by lambda_pce later

  std::vector<double> fg(c, 0.0), bg(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* row = f.data.data() + ch * hw;
    double a = 0.0, b = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
      a += g.m[p] * row[p];
      b += (1.0 - g.m[p]) * row[p];
    }
    fg[ch] = a;
    bg[ch] = b;
  }
  if (normalize) {
    g.fg_norm = kernels::normalize(fg, g.fg);
    g.bg_norm = kernels::normalize(bg, g.bg);
    g.q_norm = kernels::normalize(g.q, g.q_unit);
  } else {
    g.fg = std::move(fg);
    g.bg = std::move(bg);
    g.q_unit = g.q;
  }

  double mae = 0.0;
  for (std::size_t p = 0; p < hw; ++p) mae += std::abs(g.m[p] - double(frame.gt_mask[p]));
  g.mask_mae = mae / double(hw);
  return g;
}

// Accumulates parameter gradients for one frame given upstream gradients.
void backward_frame(const FrameSample& frame, const ModelParams& params, FrameGraph& g, double lambda_pce,
                    const std::vector<double>& g_fg, const std::vector<double>& g_bg,
                    const std::vector<double>& g_qunit, bool normalize, ParamGrads& out) {
  const FeatureView f = feature_view(frame.features);
  const std::size_t c = f.channels, hw = f.pixels, d = params.embed_dim();

  for (auto& v : g.dz) v *= lambda_pce;
  if (!g_fg.empty()) {
    const auto gf = normalize ? kernels::normalize_backward(g.fg, g.fg_norm, g_fg) : g_fg;
    const auto gb = normalize ? kernels::normalize_backward(g.bg, g.bg_norm, g_bg) : g_bg;
    std::vector<double> diff(c);
    for (std::size_t ch = 0; ch < c; ++ch) diff[ch] = gf[ch] - gb[ch];
    std::vector<double> dm(hw, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* row = f.data.data() + ch * hw;
      for (std::size_t p = 0; p < hw; ++p) dm[p] += double(row[p]) * diff[ch];
    }
    for (std::size_t p = 0; p < hw; ++p) g.dz[p] += dm[p] * g.m[p] * (1.0 - g.m[p]);
  }

  const double scale = 1.0 / std::sqrt(double(c));
  std::vector<double> dw(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* row = f.data.data() + ch * hw;
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) acc += g.dz[p] * double(row[p]);
    dw[ch] = acc * scale;
  }

  std::vector<double> dq(d, 0.0);
  if (!g_qunit.empty()) {
    dq = normalize ? kernels::normalize_backward(g.q_unit, g.q_norm, g_qunit) : g_qunit;
  }
  const Tensor& proj = params.mask_head.projection;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto row = proj.row(ch);
    auto grow = out.mask_head.row(ch);
    for (std::size_t j = 0; j < d; ++j) {
      grow[j] = static_cast<float>(double(grow[j]) + dw[ch] * g.q[j]);
      dq[j] += double(row[j]) * dw[ch];
    }
  }
  if (params.use_sem) {
    for (std::size_t j = 0; j < d; ++j) out.e_sem[j] = static_cast<float>(double(out.e_sem[j]) + dq[j]);
  }
}

}  // namespace

PartialCe partial_ce_loss(const Tensor& logits, const Tensor& scribble_fg, const Tensor& scribble_bg) {
  const ScribblePixels s = scribble_pixels(scribble_fg, scribble_bg, logits.size());
  std::vector<double> z(logits.data().begin(), logits.data().end());
  std::vector<double> grad(z.size(), 0.0);
  PartialCe out;
  out.loss = pce_kernel(z, s, grad);
  out.grad = Tensor(logits.dims());
  for (std::size_t p = 0; p < grad.size(); ++p) out.grad[p] = static_cast<float>(grad[p]);
  return out;
}

Banks make_banks(const TrainConfig& cfg, std::size_t channels) {
  return Banks{FrameBank(cfg.iimc.frame_bank_capacity, channels),
               VideoBank(cfg.iimc.video_bank_capacity, cfg.embed_dim)};
}

StepEvaluation evaluate_step(const ModelParams& params, const StepInputs& in, const Banks& banks,
                             const TrainConfig& cfg, std::optional<std::pair<std::size_t, std::size_t>> selection,
                             bool want_grads) {
  if (!in.key || !in.ref) throw ShapeError("training step needs a key and a reference frame");
  const bool normalize = cfg.iimc.normalize;
  std::size_t sel_key = 0, sel_ref = 0;
  if (selection) {
    std::tie(sel_key, sel_ref) = *selection;
    if (sel_key >= params.n_queries() || sel_ref >= params.n_queries()) throw ShapeError("selection out of range");
  } else {
    sel_key = competitor_choice(*in.key, frame_queries(*in.key, params), params);
    sel_ref = competitor_choice(*in.ref, frame_queries(*in.ref, params), params);
  }

  FrameGraph key = forward_frame(*in.key, params, sel_key, normalize);
  FrameGraph ref = forward_frame(*in.ref, params, sel_ref, normalize);

  StepEvaluation ev;
  StepReport& rep = ev.report;
  rep.selected_key = sel_key;
  rep.selected_ref = sel_ref;
  rep.key_mask_mae = key.mask_mae;
  rep.loss_pce = key.pce + ref.pce;

  std::vector<double> g_kf, g_kb, g_rf, g_rb;
  if (cfg.lambda_intra > 0) {
    std::vector<double> bank;
    if (cfg.iimc.use_frame_bank) bank = banks.frame.flat();
    const auto intra = kernels::intra(key.fg, key.bg, ref.fg, ref.bg, bank, cfg.iimc.tau, false);
    rep.loss_intra = intra.loss;
    auto scaled = [&](const std::vector<double>& v) {
      std::vector<double> s(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) s[i] = cfg.lambda_intra * v[i];
      return s;
    };
    g_kf = scaled(intra.g_key_fg);
    g_kb = scaled(intra.g_key_bg);
    g_rf = scaled(intra.g_ref_fg);
    g_rb = scaled(intra.g_ref_bg);
  }

  std::vector<double> g_qk, g_qr;
  if (cfg.lambda_inter > 0) {
    const std::size_t d = params.embed_dim();
    std::vector<double> pos(ref.q_unit), neg;
    if (cfg.iimc.use_video_bank) {
      const VideoBankSample s = banks.video.sample(in.video_id, cfg.iimc.max_neg);
      for (const Tensor& t : s.positives) pos.insert(pos.end(), t.data().begin(), t.data().end());
      for (const Tensor& t : s.negatives) neg.insert(neg.end(), t.data().begin(), t.data().end());
    }
    const auto inter = kernels::inter(key.q_unit, pos, neg, cfg.iimc.tau);
    rep.loss_inter = inter.loss;
    g_qk.resize(d);
    g_qr.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      g_qk[j] = cfg.lambda_inter * inter.g_anchor[j];
      g_qr[j] = cfg.lambda_inter * inter.g_positives[j];
    }
  }

  rep.total = cfg.lambda_pce * rep.loss_pce + cfg.lambda_intra * rep.loss_intra + cfg.lambda_inter * rep.loss_inter;
  if (!std::isfinite(rep.total)) throw NumericError("non-finite training loss");

  if (want_grads) {
    ev.grads.e_sem = Tensor(params.e_sem.dims());
    ev.grads.mask_head = Tensor(params.mask_head.projection.dims());
    // The projector only feeds the hard selection, so it receives no gradient.
    ev.grads.projector = Tensor(params.projector.weight.dims());
    backward_frame(*in.key, params, key, cfg.lambda_pce, g_kf, g_kb, g_qk, normalize, ev.grads);
    backward_frame(*in.ref, params, ref, cfg.lambda_pce, g_rf, g_rb, g_qr, normalize, ev.grads);
  }

  ev.key_bg = to_tensor(key.bg);
  ev.ref_bg = to_tensor(ref.bg);
  ev.key_embed = to_tensor(key.q_unit);
  ev.ref_embed = to_tensor(ref.q_unit);
  return ev;
}

StepReport train_step(ModelParams& params, Banks& banks, const StepInputs& in, const TrainConfig& cfg,
                      std::size_t t) {
  StepEvaluation ev;
  try {
    ev = evaluate_step(params, in, banks, cfg);
    adamw_step(params, ev.grads, cfg, t);
  } catch (const DegenerateInputError& e) {
    StepReport rep;
    rep.skipped = true;
    rep.skip_reason = e.what();
    log_warn("step " + std::to_string(t) + " skipped: " + rep.skip_reason);
    return rep;
  } catch (const NumericError& e) {
    StepReport rep;
    rep.skipped = true;
    rep.skip_reason = e.what();
    log_warn("step " + std::to_string(t) + " skipped: " + rep.skip_reason);
    return rep;
  }
  if (cfg.iimc.use_frame_bank) {
    banks.frame.push(ev.key_bg);
    banks.frame.push(ev.ref_bg);
  }
  if (cfg.iimc.use_video_bank) {
    banks.video.push(ev.key_embed, in.video_id);
    banks.video.push(ev.ref_embed, in.video_id);
  }
  return ev.report;
}

TrainResult train_loop(const std::vector<VideoSample>& dataset, const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  if (cfg.lambda_inter > 0 && dataset.size() < 2) {
    throw ConfigError("inter-video contrast needs at least 2 training videos");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t v = 0; v < dataset.size(); ++v) {
    if (dataset[v].frames.size() < 2) throw ConfigError("every training video needs at least 2 frames");
    for (std::size_t k = 0; k < dataset[v].frames.size(); ++k) pairs.emplace_back(v, k);
  }
  const std::size_t channels = feature_view(dataset.front().frames.front().features).channels;

  TrainResult result{init_params(channels, cfg), make_banks(cfg, channels), {}, {}};
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x7a1));
  std::size_t cursor = pairs.size();

  HistoryRow window;
  std::size_t window_count = 0;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (cursor == pairs.size()) {
      std::shuffle(pairs.begin(), pairs.end(), rng);
      cursor = 0;
    }
    const auto [v, k] = pairs[cursor++];
    const VideoSample& video = dataset[v];
    const auto [key, ref] = sample_pair(video, k, cfg.ref_window, rng);
    const StepReport rep = train_step(result.params, result.banks, {key, ref, video.video_id}, cfg, t);
    result.steps.push_back(rep);
    if (!rep.skipped) {
      window.loss_pce += rep.loss_pce;
      window.loss_intra += rep.loss_intra;
      window.loss_inter += rep.loss_inter;
      window.total += rep.total;
      window.train_mae += rep.key_mask_mae;
      ++window_count;
    }
    if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.iterations) {
      HistoryRow row;
      row.step = t + 1;
      if (window_count > 0) {
        const double n = double(window_count);
        row.loss_pce = window.loss_pce / n;
        row.loss_intra = window.loss_intra / n;
        row.loss_inter = window.loss_inter / n;
        row.total = window.total / n;
        row.train_mae = window.train_mae / n;
      }
      result.history.push_back(row);
      if (progress) progress(row);
      window = HistoryRow{};
      window_count = 0;
    }
  }
  return result;
}

}  // namespace fixsal
