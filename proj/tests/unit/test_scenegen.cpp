#include <doctest.h>

#include <cmath>
#include <queue>

#include "fixsal/errors.hpp"
#include "fixsal/numerics.hpp"
#include "fixsal/pse.hpp"
#include "fixsal/scenegen.hpp"

using namespace fixsal;

namespace {

SceneConfig small_scene(std::uint64_t seed) {
  SceneConfig cfg;
  cfg.channels = 16;
  cfg.frames_per_video = 6;
  cfg.seed = seed;
  return cfg;
}

std::vector<float> column(const Tensor& features, std::size_t p) {
  const std::size_t c = features.dim(0), hw = features.size() / c;
  std::vector<float> out(c);
  for (std::size_t ch = 0; ch < c; ++ch) out[ch] = features[ch * hw + p];
  return out;
}

std::size_t components(const Tensor& mask) {
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  std::vector<char> seen(h * w, 0);
  std::size_t n = 0;
  for (std::size_t s = 0; s < h * w; ++s) {
    if (mask[s] < 0.5f || seen[s]) continue;
    ++n;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop();
      const std::size_t r = p / w, c = p % w;
      const std::size_t nb[4] = {r > 0 ? p - w : p, r + 1 < h ? p + w : p, c > 0 ? p - 1 : p, c + 1 < w ? p + 1 : p};
      for (std::size_t k : nb) {
        if (mask[k] > 0.5f && !seen[k]) {
          seen[k] = 1;
          q.push(k);
        }
      }
    }
  }
  return n;
}

}  // namespace

TEST_CASE("static object keeps its mask") {
  SceneConfig cfg = small_scene(1);
  cfg.object_speed = 0;
  const VideoSample v = generate_scene(cfg);
  for (const auto& f : v.frames) CHECK(f.gt_mask.bit_equal(v.frames[0].gt_mask));
}

TEST_CASE("noise-free features sit on the cluster means") {
  SceneConfig cfg = small_scene(2);
  cfg.noise_std = 0;
  cfg.feature_separation = 2;
  const FeatureWorld world = feature_world(cfg);
  Tensor diff({cfg.channels});
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = world.fg_mean[i] - world.bg_mean[i];
  CHECK(norm(diff.data()) == doctest::Approx(2.0).epsilon(1e-5));

  const VideoSample video = generate_scene(cfg);
  const FrameSample& f = video.frames[0];
  std::size_t fg_px = 0, bg_px = 0;
  for (std::size_t p = 0; p < f.gt_mask.size(); ++p) {
    (f.gt_mask[p] > 0.5f ? fg_px : bg_px) = p;
  }
  const auto a = column(f.features, fg_px), b = column(f.features, bg_px);
  CHECK(std::equal(a.begin(), a.end(), world.fg_mean.data().begin()));
  // Shared component of norm o plus +-s/2 along an orthogonal axis: cos = (o^2 - s^2/4) / (o^2 + s^2/4).
  const double o = cfg.feature_offset, s = cfg.feature_separation;
  CHECK(cosine(a, b) == doctest::Approx((o * o - s * s / 4) / (o * o + s * s / 4)).epsilon(1e-5));
}

TEST_CASE("generation is deterministic") {
  const SceneConfig cfg = small_scene(3);
  const VideoSample a = generate_scene(cfg, 4), b = generate_scene(cfg, 4);
  REQUIRE(a.frames.size() == b.frames.size());
  CHECK(a.video_id == 4);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].features.bit_equal(b.frames[i].features));
    CHECK(a.frames[i].gt_mask.bit_equal(b.frames[i].gt_mask));
    CHECK(a.frames[i].scribble_fg.bit_equal(b.frames[i].scribble_fg));
    CHECK(a.frames[i].scribble_bg.bit_equal(b.frames[i].scribble_bg));
    CHECK(a.frames[i].fixation.bit_equal(b.frames[i].fixation));
  }
}

TEST_CASE("scribble and fixation invariants over many videos") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SceneConfig cfg = small_scene(seed);
    const VideoSample v = generate_scene(cfg);
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
      const FrameSample& f = v.frames[i];
      double fg = 0, bg = 0, area = 0;
      for (std::size_t p = 0; p < f.gt_mask.size(); ++p) {
        const bool inside = f.gt_mask[p] > 0.5f;
        CHECK_FALSE((f.scribble_fg[p] > 0.5f && !inside));
        CHECK_FALSE((f.scribble_bg[p] > 0.5f && inside));
        fg += f.scribble_fg[p];
        bg += f.scribble_bg[p];
        area += inside;
      }
      CHECK(fg >= 3);
      CHECK(bg >= 3);
      CHECK(fg <= 0.2 * area);
      CHECK(bg <= 0.2 * (f.gt_mask.size() - area));
      CHECK(components(f.scribble_fg) == 1);
      CHECK(components(f.scribble_bg) == 1);

      float peak = 0;
      for (float x : f.fixation.data()) peak = std::max(peak, x);
      CHECK(peak == 1.0f);
      if (i >= cfg.fixation_lock_frames) {
        const Point2 c = fixation_centroid(f.fixation);
        const auto [ox, oy] = mask_centroid(f.gt_mask);
        CHECK(std::hypot(c.x - ox, c.y - oy) <= 0.5);
      }
    }
  }
}

TEST_CASE("fixation drifts linearly from the frame centre") {
  SceneConfig cfg = small_scene(0);
  cfg.height = cfg.width = 63;
  cfg.fixation_lock_frames = 4;
  Tensor gt({63, 63});
  for (std::size_t r = 10; r < 17; ++r) {
    for (std::size_t c = 40; c < 47; ++c) gt.at(r, c) = 1;
  }
  const Point2 start = fixation_centroid(synth_fixation(gt, 0, cfg));
  CHECK(start.x == doctest::Approx(31.0).epsilon(1e-4));
  CHECK(start.y == doctest::Approx(31.0).epsilon(1e-4));
  const Point2 mid = fixation_centroid(synth_fixation(gt, 2, cfg));
  CHECK(mid.x == doctest::Approx((31.0 + 43.0) / 2).epsilon(1e-4));
  CHECK(mid.y == doctest::Approx((31.0 + 13.0) / 2).epsilon(1e-4));
  const Point2 end = fixation_centroid(synth_fixation(gt, 9, cfg));
  CHECK(end.x == doctest::Approx(43.0).epsilon(1e-4));
  CHECK(end.y == doctest::Approx(13.0).epsilon(1e-4));

  CHECK_THROWS_AS(synth_fixation(Tensor({63, 63}), 0, cfg), DegenerateInputError);
}

TEST_CASE("scribble generation rejects tiny regions") {
  Tensor gt({8, 8});
  gt.at(3, 3) = gt.at(3, 4) = gt.at(4, 3) = gt.at(4, 4) = 1;
  CHECK_THROWS_AS(synth_scribble(gt, 1), DegenerateInputError);
}

TEST_CASE("invalid scene configs name the field") {
  SceneConfig cfg;
  cfg.object_max_size = 40;
  try {
    cfg.validate();
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("object_max_size") != std::string::npos);
  }
  SceneConfig neg;
  neg.feature_separation = -1;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
}

TEST_CASE("clusters are separable when separation dominates noise") {
  SceneConfig cfg = small_scene(9);
  cfg.channels = 64;
  cfg.feature_separation = 4.0;
  cfg.noise_std = 1.0;
  const FrameSample f = generate_scene(cfg).frames[0];
  std::vector<std::size_t> fg, bg;
  for (std::size_t p = 0; p < f.gt_mask.size(); ++p) (f.gt_mask[p] > 0.5f ? fg : bg).push_back(p);
  double ff = 0, fb = 0;
  int nff = 0, nfb = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto a = column(f.features, fg[i % fg.size()]);
    const auto b = column(f.features, fg[(i * 7 + 3) % fg.size()]);
    const auto c = column(f.features, bg[(i * 13) % bg.size()]);
    ff += cosine(a, b);
    fb += cosine(a, c);
    ++nff;
    ++nfb;
  }
  CHECK(fb / nfb < ff / nff);
}
