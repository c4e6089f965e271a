#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fixsal/slq.hpp"
#include "fixsal/tensor.hpp"

namespace fixsal {

// Intra-/inter-video contrastive objectives and the two memory banks feeding
// them with extra negatives (frame bank) and cross-video samples (video bank).

inline constexpr double kDefaultTemperature = 0.07;
inline constexpr double kMaxLogit = 80.0;  // |dot / tau| above this is rejected

struct FgBgVectors {
  Tensor fg;  // C
  Tensor bg;  // C
};

/// V_fg = M F^T and V_bg = (1 - M) F^T for a mask M over the pixels of F.
FgBgVectors fg_bg_from_mask(const Tensor& features, const Tensor& mask, bool normalize = true);

/// Same, with M produced by the mask head for `query`.
FgBgVectors fg_bg_vectors(const Tensor& features, std::span<const float> query, const MaskHeadParams& head,
                          bool normalize = true);

struct ContrastiveBatch {
  Tensor key_fg, key_bg, ref_fg, ref_bg;
  std::vector<Tensor> bank_negatives;  // extra background vectors
  double temperature = kDefaultTemperature;
};

struct IntraLoss {
  double loss = 0.0;
  Tensor grad_key_fg, grad_key_bg, grad_ref_fg, grad_ref_bg;
  std::vector<Tensor> grad_bank;
};

/// -log( e^{k.r/t} / (e^{k.r/t} + sum_{a in {k,r}} sum_{b in B} e^{a.b/t}) ),
/// B = {key_bg, ref_bg} u bank_negatives, with exact gradients for every vector.
IntraLoss intra_loss(const ContrastiveBatch& batch);

struct InterLoss {
  double loss = 0.0;
  Tensor grad_anchor;
  std::vector<Tensor> grad_positives;
  std::vector<Tensor> grad_negatives;
};

/// Mean over positives p of -log( e^{i.p/t} / (e^{i.p/t} + sum_n e^{i.n/t}) ).
InterLoss inter_loss(const Tensor& anchor, const std::vector<Tensor>& positives,
                     const std::vector<Tensor>& negatives, double temperature = kDefaultTemperature);

namespace kernels {

// Double-precision cores shared by the Tensor API and the trainer. Negatives are
// passed as a flat row-major matrix with `dim` columns.

struct IntraOut {
  double loss = 0.0;
  std::vector<double> g_key_fg, g_key_bg, g_ref_fg, g_ref_bg;
  std::vector<double> g_bank;  // filled only when requested
};

IntraOut intra(std::span<const double> key_fg, std::span<const double> key_bg, std::span<const double> ref_fg,
               std::span<const double> ref_bg, std::span<const double> bank, double tau, bool bank_grads);

struct InterOut {
  double loss = 0.0;
  std::vector<double> g_anchor;
  std::vector<double> g_positives;  // flat, same layout as the input
  std::vector<double> g_negatives;
};

InterOut inter(std::span<const double> anchor, std::span<const double> positives,
               std::span<const double> negatives, double tau);

/// Unit vector and its norm; throws DegenerateInputError below 1e-12.
double normalize(std::span<const double> v, std::vector<double>& out);

/// Pulls a gradient w.r.t. v/|v| back to v: (g - u (u.g)) / |v|.
std::vector<double> normalize_backward(std::span<const double> unit, double norm, std::span<const double> g);

}  // namespace kernels

/// FIFO ring buffer of background vectors.
class FrameBank {
 public:
  FrameBank() = default;
  FrameBank(std::size_t capacity, std::size_t dim);

  void push(const Tensor& v);
  void clear();

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::size_t cursor() const { return cursor_; }

  /// Entries oldest first.
  std::vector<Tensor> snapshot() const;
  /// Entries oldest first as one flat row-major buffer.
  std::vector<double> flat() const;

  void save(const std::filesystem::path& stem) const;
  static FrameBank load(const std::filesystem::path& stem);

  bool operator==(const FrameBank&) const = default;

 private:
  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;  // next slot to write
  std::vector<float> slots_;
};

struct VideoBankSample {
  std::vector<Tensor> positives;  // same video, oldest first
  std::vector<Tensor> negatives;  // other videos, at most max_neg most recent, oldest first
};

/// FIFO ring buffer of (query embedding, video id) pairs.
class VideoBank {
 public:
  VideoBank() = default;
  VideoBank(std::size_t capacity, std::size_t dim);

  void push(const Tensor& embedding, std::int64_t video_id);
  void clear();

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::size_t cursor() const { return cursor_; }

  /// Entries oldest first.
  std::vector<std::pair<Tensor, std::int64_t>> snapshot() const;

  VideoBankSample sample(std::int64_t current_video_id, std::size_t max_neg) const;

  void save(const std::filesystem::path& stem) const;
  static VideoBank load(const std::filesystem::path& stem);

  bool operator==(const VideoBank&) const = default;

 private:
  std::size_t slot_of(std::size_t age_index) const;

  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::vector<float> slots_;
  std::vector<std::int64_t> ids_;
};

}  // namespace fixsal
