#include "fixsal/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fixsal/errors.hpp"
#include "fixsal/tensor_io.hpp"

namespace fixsal {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void DatasetConfig::validate() const {
  if (train_videos == 0) throw ConfigError("io.train_videos: must be positive");
}

std::uint64_t video_seed(std::uint64_t base, std::int64_t id) {
  return derive_seed(base, 0x7100 + static_cast<std::uint64_t>(id));
}

Dataset generate_dataset(const SceneConfig& scene, const DatasetConfig& cfg) {
  scene.validate();
  cfg.validate();
  Dataset out;
  out.scene = scene;
  const std::size_t total = cfg.train_videos + cfg.test_videos;
  for (std::size_t i = 0; i < total; ++i) {
    SceneConfig vc = scene;
    vc.seed = video_seed(scene.seed, static_cast<std::int64_t>(i));
    out.video_seeds.push_back(vc.seed);
    VideoSample v = generate_scene(vc, static_cast<std::int64_t>(i));
    (i < cfg.train_videos ? out.train : out.test).push_back(std::move(v));
  }
  return out;
}

namespace {

constexpr const char* kFields[] = {"features", "gt", "scribble_fg", "scribble_bg", "fixation"};

Tensor FrameSample::*field_ptr(std::size_t k) {
  switch (k) {
    case 0: return &FrameSample::features;
    case 1: return &FrameSample::gt_mask;
    case 2: return &FrameSample::scribble_fg;
    case 3: return &FrameSample::scribble_bg;
    default: return &FrameSample::fixation;
  }
}

Tensor stack(const VideoSample& v, Tensor FrameSample::*field) {
  const Tensor& first = v.frames.front().*field;
  std::vector<std::size_t> dims{v.frames.size()};
  dims.insert(dims.end(), first.dims().begin(), first.dims().end());
  std::vector<float> data;
  data.reserve(Tensor::count(dims));
  for (const FrameSample& f : v.frames) {
    const Tensor& t = f.*field;
    if (t.dims() != first.dims()) throw ShapeError("frames of one video must share shapes");
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(dims), std::move(data));
}

std::string video_dir_name(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "video_%03lld", static_cast<long long>(id));
  return buf;
}

ordered_json scene_to_json(const SceneConfig& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"channels", s.channels},
          {"frames_per_video", s.frames_per_video},
          {"num_objects", s.num_objects},
          {"object_speed", s.object_speed},
          {"object_min_size", s.object_min_size},
          {"object_max_size", s.object_max_size},
          {"feature_separation", s.feature_separation},
          {"feature_offset", s.feature_offset},
          {"fixation_sigma", s.fixation_sigma},
          {"fixation_lock_frames", s.fixation_lock_frames},
          {"noise_std", s.noise_std},
          {"seed", s.seed},
          {"world_seed", s.world_seed}};
}

SceneConfig scene_from_json(const ordered_json& j) {
  SceneConfig s;
  s.height = j.at("height");
  s.width = j.at("width");
  s.channels = j.at("channels");
  s.frames_per_video = j.at("frames_per_video");
  s.num_objects = j.at("num_objects");
  s.object_speed = j.at("object_speed");
  s.object_min_size = j.at("object_min_size");
  s.object_max_size = j.at("object_max_size");
  s.feature_separation = j.at("feature_separation");
  s.feature_offset = j.at("feature_offset");
  s.fixation_sigma = j.at("fixation_sigma");
  s.fixation_lock_frames = j.at("fixation_lock_frames");
  s.noise_std = j.at("noise_std");
  s.seed = j.at("seed");
  s.world_seed = j.at("world_seed");
  return s;
}

void write_video(const VideoSample& v, const fs::path& dir) {
  if (v.frames.empty()) throw ConfigError("cannot write a video without frames");
  fs::create_directories(dir);
  for (std::size_t k = 0; k < std::size(kFields); ++k) {
    write_tensor(dir / (std::string(kFields[k]) + ".egct"), stack(v, field_ptr(k)));
  }
  for (std::size_t f = 0; f < v.frames.size(); ++f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "gt_%03zu.pgm", f);
    write_pgm(dir / buf, v.frames[f].gt_mask);
  }
}

VideoSample read_video(const fs::path& dir, std::int64_t id, std::size_t frames) {
  VideoSample v;
  v.video_id = id;
  v.frames.resize(frames);
  for (std::size_t k = 0; k < std::size(kFields); ++k) {
    const Tensor t = read_tensor(dir / (std::string(kFields[k]) + ".egct"));
    if (t.rank() < 2 || t.dim(0) != frames) throw FormatError(dir.string() + ": frame count mismatch", 0);
    const std::vector<std::size_t> dims(t.dims().begin() + 1, t.dims().end());
    const std::size_t stride = Tensor::count(dims);
    for (std::size_t f = 0; f < frames; ++f) {
      auto first = t.data().begin() + static_cast<std::ptrdiff_t>(f * stride);
      v.frames[f].*field_ptr(k) = Tensor(dims, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(stride)));
    }
  }
  return v;
}

}  // namespace

void write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json videos = ordered_json::array();
  auto emit = [&](const std::vector<VideoSample>& split, const char* name) {
    for (const VideoSample& v : split) {
      const std::string sub = video_dir_name(v.video_id);
      write_video(v, dir / sub);
      const auto id = static_cast<std::size_t>(v.video_id);
      videos.push_back({{"id", v.video_id},
                        {"split", name},
                        {"frames", v.frames.size()},
                        {"seed", id < data.video_seeds.size() ? data.video_seeds[id] : 0},
                        {"dir", sub}});
    }
  };
  emit(data.train, "train");
  emit(data.test, "test");
  ordered_json m;
  m["format"] = "fixsal-dataset";
  m["version"] = 1;
  m["scene"] = scene_to_json(data.scene);
  m["train_videos"] = data.train.size();
  m["test_videos"] = data.test.size();
  m["videos"] = videos;
  const std::string text = m.dump(2) + "\n";
  write_file_bytes(dir / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  const auto bytes = read_file_bytes(manifest);
  ordered_json m;
  try {
    m = ordered_json::parse(bytes.begin(), bytes.end());
    Dataset out;
    out.scene = scene_from_json(m.at("scene"));
    for (const auto& v : m.at("videos")) {
      const std::int64_t id = v.at("id");
      const std::size_t frames = v.at("frames");
      VideoSample video = read_video(dir / v.at("dir").get<std::string>(), id, frames);
      const auto idx = static_cast<std::size_t>(id);
      if (out.video_seeds.size() <= idx) out.video_seeds.resize(idx + 1, 0);
      out.video_seeds[idx] = v.at("seed");
      (v.at("split").get<std::string>() == "train" ? out.train : out.test).push_back(std::move(video));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what(), 0);
  }
}

}  // namespace fixsal
