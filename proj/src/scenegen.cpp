#include "fixsal/scenegen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "fixsal/numerics.hpp"

namespace fixsal {
namespace {

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(n);
  double nn = 0.0;
  do {
    nn = 0.0;
    for (auto& e : v) {
      e = gauss(rng);
      nn += e * e;
    }
  } while (nn < 1e-12);
  for (auto& e : v) e /= std::sqrt(nn);
  return v;
}

// Triangle wave keeping `p` inside [lo, hi].
double reflect(double p, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0) return lo;
  double t = std::fmod(p - lo, 2 * span);
  if (t < 0) t += 2 * span;
  return lo + (t <= span ? t : 2 * span - t);
}

struct ObjectTrack {
  bool ellipse = true;
  double half_w = 0, half_h = 0;
  double x0 = 0, y0 = 0, vx = 0, vy = 0;
};

Tensor render_object(const ObjectTrack& obj, std::size_t frame, std::size_t h, std::size_t w) {
  const double cx = reflect(obj.x0 + obj.vx * double(frame), obj.half_w, double(w) - 1 - obj.half_w);
  const double cy = reflect(obj.y0 + obj.vy * double(frame), obj.half_h, double(h) - 1 - obj.half_h);
  Tensor mask({h, w});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double dx = (double(c) - cx) / obj.half_w;
      const double dy = (double(r) - cy) / obj.half_h;
      const bool inside = obj.ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
      mask.at(r, c) = inside ? 1.0f : 0.0f;
    }
  }
  return mask;
}

// Self-avoiding 4-connected walk with directional momentum, restricted to `region`.
std::vector<std::size_t> random_stroke(const std::vector<char>& region, std::size_t h, std::size_t w,
                                       std::size_t target, std::mt19937_64& rng) {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < region.size(); ++i)
    if (region[i]) cells.push_back(i);
  if (cells.empty()) return {};
  constexpr std::array<int, 4> dr = {-1, 1, 0, 0};
  constexpr std::array<int, 4> dc = {0, 0, -1, 1};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> best;
  for (int attempt = 0; attempt < 24 && best.size() < target; ++attempt) {
    std::vector<char> used(region.size(), 0);
    std::vector<std::size_t> path;
    std::size_t cur = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
    path.push_back(cur);
    used[cur] = 1;
    int heading = std::uniform_int_distribution<int>(0, 3)(rng);
    while (path.size() < target) {
      std::array<int, 4> open{};
      int n_open = 0;
      bool heading_open = false;
      const int r = int(cur / w), c = int(cur % w);
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr < 0 || cc < 0 || rr >= int(h) || cc >= int(w)) continue;
        const std::size_t idx = std::size_t(rr) * w + std::size_t(cc);
        if (!region[idx] || used[idx]) continue;
        open[n_open++] = k;
        if (k == heading) heading_open = true;
      }
      if (n_open == 0) break;
      if (!heading_open || unit(rng) > 0.75) heading = open[std::uniform_int_distribution<int>(0, n_open - 1)(rng)];
      cur = std::size_t(r + dr[heading]) * w + std::size_t(c + dc[heading]);
      used[cur] = 1;
      path.push_back(cur);
    }
    if (path.size() > best.size()) best = std::move(path);
  }
  return best;
}

Tensor stroke_in(const std::vector<char>& region, std::size_t h, std::size_t w, std::mt19937_64& rng,
                 const char* label) {
  const std::size_t area = std::size_t(std::count(region.begin(), region.end(), 1));
  const std::size_t max_len = area / 5;
  if (max_len < 3) {
    throw DegenerateInputError(std::string(label) + " region too small for a 3-pixel scribble");
  }
  const std::size_t target = std::clamp<std::size_t>(std::size_t(std::lround(0.1 * double(area))), 3, max_len);

  // Prefer the eroded region so strokes stay off the object boundary.
  std::vector<char> interior(region.size(), 0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      if (!region[i]) continue;
      const bool keep = (r == 0 || region[i - w]) && (r + 1 == h || region[i + w]) &&
                        (c == 0 || region[i - 1]) && (c + 1 == w || region[i + 1]);
      interior[i] = keep ? 1 : 0;
    }
  }
  auto path = random_stroke(interior, h, w, target, rng);
  if (path.size() < 3) path = random_stroke(region, h, w, target, rng);
  if (path.size() < 3) {
    throw DegenerateInputError(std::string(label) + " region admits no 4-connected path of length 3");
  }
  Tensor out({h, w});
  for (std::size_t i : path) out[i] = 1.0f;
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SceneConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("scene." + field + ": " + why);
  };
  if (height == 0) fail("height", "must be positive");
  if (width == 0) fail("width", "must be positive");
  if (channels == 0) fail("channels", "must be positive");
  if (frames_per_video == 0) fail("frames_per_video", "must be positive");
  if (num_objects != 1) fail("num_objects", "only single-object scenes are supported");
  if (!(object_speed >= 0)) fail("object_speed", "must be non-negative");
  if (!(object_min_size >= 2)) fail("object_min_size", "must be at least 2 pixels");
  if (object_max_size < object_min_size) fail("object_max_size", "must be >= object_min_size");
  if (object_max_size > double(std::min(height, width)) - 1) fail("object_max_size", "object larger than frame");
  if (!(feature_separation >= 0)) fail("feature_separation", "must be non-negative");
  if (!(feature_offset >= 0)) fail("feature_offset", "must be non-negative");
  if (!(fixation_sigma > 0)) fail("fixation_sigma", "must be positive");
  if (!(noise_std >= 0)) fail("noise_std", "must be non-negative");
}

FeatureWorld feature_world(const SceneConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.world_seed, 0xfea7));
  const std::size_t n = cfg.channels;
  std::vector<double> shared = random_unit(rng, n);
  std::vector<double> dir = random_unit(rng, n);
  if (n > 1) {
    // Gram-Schmidt so the discriminative direction is orthogonal to the shared one.
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) proj += dir[i] * shared[i];
    double nn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dir[i] -= proj * shared[i];
      nn += dir[i] * dir[i];
    }
    for (auto& e : dir) e /= std::sqrt(nn);
  } else {
    shared[0] = 0.0;
  }
  FeatureWorld world{Tensor({n}), Tensor({n})};
  const double half = cfg.feature_separation / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double base = n > 1 ? cfg.feature_offset * shared[i] : 0.0;
    world.fg_mean[i] = static_cast<float>(base + half * dir[i]);
    world.bg_mean[i] = static_cast<float>(base - half * dir[i]);
  }
  return world;
}

std::pair<double, double> mask_centroid(const Tensor& mask) {
  if (mask.rank() != 2) throw ShapeError("mask must be HxW");
  double sx = 0, sy = 0, n = 0;
  for (std::size_t r = 0; r < mask.dim(0); ++r) {
    for (std::size_t c = 0; c < mask.dim(1); ++c) {
      if (mask.at(r, c) > 0.5f) {
        sx += double(c);
        sy += double(r);
        n += 1;
      }
    }
  }
  if (n == 0) throw DegenerateInputError("centroid of an empty mask");
  return {sx / n, sy / n};
}

Tensor synth_fixation(const Tensor& gt_mask, std::size_t frame_idx, const SceneConfig& cfg) {
  const auto [ox, oy] = mask_centroid(gt_mask);
  const std::size_t h = gt_mask.dim(0), w = gt_mask.dim(1);
  const double fx = (double(w) - 1) / 2.0, fy = (double(h) - 1) / 2.0;
  const double t = cfg.fixation_lock_frames == 0
                       ? 1.0
                       : std::min(1.0, double(frame_idx) / double(cfg.fixation_lock_frames));
  const double cx = fx + t * (ox - fx);
  const double cy = fy + t * (oy - fy);
  const double inv = 1.0 / (2.0 * cfg.fixation_sigma * cfg.fixation_sigma);
  std::vector<double> heat(h * w);
  double peak = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double dx = double(c) - cx, dy = double(r) - cy;
      heat[r * w + c] = std::exp(-(dx * dx + dy * dy) * inv);
      peak = std::max(peak, heat[r * w + c]);
    }
  }
  Tensor out({h, w});
  for (std::size_t i = 0; i < heat.size(); ++i) out[i] = static_cast<float>(heat[i] / peak);
  return out;
}

std::pair<Tensor, Tensor> synth_scribble(const Tensor& gt_mask, std::uint64_t seed) {
  if (gt_mask.rank() != 2) throw ShapeError("mask must be HxW");
  const std::size_t h = gt_mask.dim(0), w = gt_mask.dim(1);
  std::vector<char> fg(h * w), bg(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    fg[i] = gt_mask[i] > 0.5f ? 1 : 0;
    bg[i] = fg[i] ? 0 : 1;
  }
  std::mt19937_64 rng(derive_seed(seed, 0x5c71));
  Tensor scr_fg = stroke_in(fg, h, w, rng, "foreground");
  Tensor scr_bg = stroke_in(bg, h, w, rng, "background");
  return {std::move(scr_fg), std::move(scr_bg)};
}

VideoSample generate_scene(const SceneConfig& cfg, std::int64_t video_id) {
  cfg.validate();
  const std::size_t h = cfg.height, w = cfg.width, c = cfg.channels;
  const FeatureWorld world = feature_world(cfg);

  std::mt19937_64 rng(derive_seed(cfg.seed, 0x0b1ec7));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ObjectTrack obj;
  obj.ellipse = unit(rng) < 0.5;
  const double span = cfg.object_max_size - cfg.object_min_size;
  obj.half_w = (cfg.object_min_size + span * unit(rng)) / 2.0;
  obj.half_h = (cfg.object_min_size + span * unit(rng)) / 2.0;
  obj.x0 = obj.half_w + unit(rng) * (double(w) - 1 - 2 * obj.half_w);
  obj.y0 = obj.half_h + unit(rng) * (double(h) - 1 - 2 * obj.half_h);
  const double angle = 2.0 * M_PI * unit(rng);
  obj.vx = cfg.object_speed * std::cos(angle);
  obj.vy = cfg.object_speed * std::sin(angle);

  std::mt19937_64 noise_rng(derive_seed(cfg.seed, 0x0015e));
  std::normal_distribution<double> gauss(0.0, 1.0);

  VideoSample video;
  video.video_id = video_id;
  video.frames.reserve(cfg.frames_per_video);
  for (std::size_t f = 0; f < cfg.frames_per_video; ++f) {
    FrameSample frame;
    frame.gt_mask = render_object(obj, f, h, w);
    frame.features = Tensor({c, h, w});
    auto feat = frame.features.data();
    for (std::size_t p = 0; p < h * w; ++p) {
      const Tensor& mean = frame.gt_mask[p] > 0.5f ? world.fg_mean : world.bg_mean;
      for (std::size_t ch = 0; ch < c; ++ch) {
        feat[ch * h * w + p] = static_cast<float>(mean[ch] + cfg.noise_std * gauss(noise_rng));
      }
    }
    auto [sfg, sbg] = synth_scribble(frame.gt_mask, derive_seed(cfg.seed, 0x5c00 + f));
    frame.scribble_fg = std::move(sfg);
    frame.scribble_bg = std::move(sbg);
    frame.fixation = synth_fixation(frame.gt_mask, f, cfg);
    video.frames.push_back(std::move(frame));
  }
  return video;
}

}  // namespace fixsal
