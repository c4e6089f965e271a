#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "fixsal/tensor.hpp"

namespace fixsal {

/// Parameters of one synthetic video. The feature cluster means depend only on
/// (world_seed, channels, feature_separation, feature_offset), so videos generated
/// with different `seed` but the same world share foreground/background semantics.
struct SceneConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 256;
  std::size_t frames_per_video = 12;
  std::size_t num_objects = 1;
  double object_speed = 1.0;        // pixels per frame
  double object_min_size = 10.0;    // full extent in pixels
  double object_max_size = 16.0;
  double feature_separation = 8.0;  // |mu_fg - mu_bg|
  double feature_offset = 3.0;      // norm of the component shared by both means
  double fixation_sigma = 2.0;      // pixels
  std::size_t fixation_lock_frames = 3;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct FrameSample {
  Tensor features;     // C x H x W
  Tensor gt_mask;      // H x W, {0,1}
  Tensor scribble_fg;  // H x W, {0,1}, subset of gt_mask
  Tensor scribble_bg;  // H x W, {0,1}, disjoint from gt_mask
  Tensor fixation;     // H x W, peak-normalized to 1
};

struct VideoSample {
  std::int64_t video_id = 0;
  std::vector<FrameSample> frames;
};

struct FeatureWorld {
  Tensor fg_mean;  // C
  Tensor bg_mean;  // C
};

FeatureWorld feature_world(const SceneConfig& cfg);

VideoSample generate_scene(const SceneConfig& cfg, std::int64_t video_id = 0);

/// Intensity-free geometric centroid (x = column, y = row) of a binary mask.
std::pair<double, double> mask_centroid(const Tensor& mask);

/// Gaussian gaze heatmap drifting linearly from the frame center (frame 0) to
/// the object centroid (frame >= fixation_lock_frames).
Tensor synth_fixation(const Tensor& gt_mask, std::size_t frame_idx, const SceneConfig& cfg);

/// Random 4-connected strokes: one inside the mask, one outside it. Each covers
/// at most 20% of its region.
std::pair<Tensor, Tensor> synth_scribble(const Tensor& gt_mask, std::uint64_t seed);

/// Mixes a base seed with a stream tag into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace fixsal
