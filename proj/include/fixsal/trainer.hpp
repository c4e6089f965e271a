#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fixsal/iimc.hpp"
#include "fixsal/scenegen.hpp"
#include "fixsal/slq.hpp"
#include "fixsal/tensor.hpp"

namespace fixsal {

struct IimcConfig {
  double tau = kDefaultTemperature;
  std::size_t frame_bank_capacity = 4096;
  std::size_t video_bank_capacity = 4096;
  std::size_t max_neg = 256;
  bool normalize = true;  // unit-norm V_fg/V_bg and query embeddings before the losses
  bool use_frame_bank = true;
  bool use_video_bank = true;

  void validate() const;
};

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  std::size_t iterations = 2000;
  std::int64_t lr_drop_iter = -1;  // negative: two thirds of `iterations`
  double lambda_intra = 1.0;
  double lambda_inter = 1.0;
  double lambda_pce = 1.0;
  std::size_t ref_window = 10;
  std::uint64_t seed = 0;
  std::size_t n_queries = 32;
  std::size_t embed_dim = 64;
  std::size_t proj_dim = 64;
  std::size_t log_every = 100;
  bool use_pos = true;
  bool use_sem = true;
  IimcConfig iimc;

  void validate() const;
  std::size_t effective_lr_drop() const;
};

/// Learnable state plus AdamW moments. The query offsets are fixed at init.
struct ModelParams {
  Tensor e_sem;               // d
  MaskHeadParams mask_head;   // C x d
  ProjectorParams projector;  // d_proj x C
  Tensor query_offsets;       // N_q x d
  bool use_pos = true;
  bool use_sem = true;

  Tensor m_e_sem, v_e_sem;
  Tensor m_mask_head, v_mask_head;
  Tensor m_projector, v_projector;
  std::size_t adam_steps = 0;

  std::size_t embed_dim() const { return e_sem.size(); }
  std::size_t channels() const { return mask_head.projection.dim(0); }
  std::size_t n_queries() const { return query_offsets.dim(0); }
};

ModelParams init_params(std::size_t channels, const TrainConfig& cfg);

struct ParamGrads {
  Tensor e_sem;
  Tensor mask_head;
  Tensor projector;
};

/// Decoupled-weight-decay Adam (b1 0.9, b2 0.999, eps 1e-8), bias corrected,
/// learning rate divided by 10 from step `lr_drop` on. `t` is the 0-based step.
/// Throws NumericError without touching `params` if any gradient is non-finite.
void adamw_step(ModelParams& params, const ParamGrads& grads, const TrainConfig& cfg, std::size_t t);

/// The N_q x d queries for a frame: e_pos(fixation centroid) + e_sem + offsets.
Tensor frame_queries(const FrameSample& frame, const ModelParams& params);

/// Reference frame drawn uniformly from [key - w, key + w] minus {key}, clipped to the video.
std::size_t sample_ref_index(std::size_t n_frames, std::size_t key_idx, std::size_t window, std::mt19937_64& rng);
std::pair<const FrameSample*, const FrameSample*> sample_pair(const VideoSample& video, std::size_t key_idx,
                                                              std::size_t window, std::mt19937_64& rng);

struct PartialCe {
  double loss = 0.0;
  Tensor grad;  // w.r.t. the logits
};

/// Mean binary cross-entropy over scribbled pixels (fg target 1, bg target 0).
/// Logits are clamped to [-80, 80].
PartialCe partial_ce_loss(const Tensor& logits, const Tensor& scribble_fg, const Tensor& scribble_bg);

struct Banks {
  FrameBank frame;
  VideoBank video;
};

Banks make_banks(const TrainConfig& cfg, std::size_t channels);

struct StepReport {
  double loss_pce = 0.0;  // L_pce(key) + L_pce(ref)
  double loss_intra = 0.0;
  double loss_inter = 0.0;
  double total = 0.0;     // weighted sum that was optimized
  std::size_t selected_key = 0;
  std::size_t selected_ref = 0;
  double key_mask_mae = 0.0;  // monitoring only
  bool skipped = false;
  std::string skip_reason;
};

/// Everything a training step needs besides the parameters.
struct StepInputs {
  const FrameSample* key = nullptr;
  const FrameSample* ref = nullptr;
  std::int64_t video_id = 0;
};

struct StepEvaluation {
  StepReport report;
  ParamGrads grads;
  Tensor key_bg, ref_bg;      // vectors pushed to the frame bank
  Tensor key_embed, ref_embed;  // vectors pushed to the video bank
};

/// Forward and analytic backward of the full step objective. When `selection`
/// is given the query competitor is bypassed and those indices are used, which
/// makes the objective a smooth function of the parameters (gradient checks).
StepEvaluation evaluate_step(const ModelParams& params, const StepInputs& in, const Banks& banks,
                             const TrainConfig& cfg,
                             std::optional<std::pair<std::size_t, std::size_t>> selection = std::nullopt,
                             bool want_grads = true);

/// evaluate_step + AdamW update + bank pushes. Degenerate frames skip the step.
StepReport train_step(ModelParams& params, Banks& banks, const StepInputs& in, const TrainConfig& cfg,
                      std::size_t t);

struct HistoryRow {
  std::size_t step = 0;  // number of completed steps
  double loss_pce = 0.0;
  double loss_intra = 0.0;
  double loss_inter = 0.0;
  double total = 0.0;
  double train_mae = 0.0;
};

struct TrainResult {
  ModelParams params;
  Banks banks;
  std::vector<HistoryRow> history;  // window means every log_every steps
  std::vector<StepReport> steps;
};

using ProgressFn = std::function<void(const HistoryRow&)>;

TrainResult train_loop(const std::vector<VideoSample>& dataset, const TrainConfig& cfg,
                       const ProgressFn& progress = {});

}  // namespace fixsal
