#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fixsal/scenegen.hpp"

namespace fixsal {

struct DatasetConfig {
  std::size_t train_videos = 8;
  std::size_t test_videos = 4;
  void validate() const;
};

struct Dataset {
  SceneConfig scene;  // seed is the dataset base seed
  std::vector<VideoSample> train;
  std::vector<VideoSample> test;
  std::vector<std::uint64_t> video_seeds;  // indexed by video id
};

/// Seed used for video `id` of a dataset with the given base seed.
std::uint64_t video_seed(std::uint64_t base, std::int64_t id);

/// Videos 0..train-1 form the training split, the rest the test split. All
/// videos share the feature world of `scene.world_seed`.
Dataset generate_dataset(const SceneConfig& scene, const DatasetConfig& cfg);

/// Layout: manifest.json plus one directory per video holding stacked .egct
/// tensors (features T x C x H x W; masks T x H x W) and PGM ground truth.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace fixsal
