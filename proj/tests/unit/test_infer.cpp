#include <doctest.h>

#include <random>

#include "fixsal/errors.hpp"
#include "fixsal/infer.hpp"
#include "fixsal/numerics.hpp"
#include "fixsal/scenegen.hpp"
#include "oracles.hpp"

using namespace fixsal;

namespace {

VideoSample small_video(std::uint64_t seed, std::size_t frames = 6) {
  SceneConfig s;
  s.height = s.width = 16;
  s.channels = 16;
  s.frames_per_video = frames;
  s.object_min_size = 6;
  s.object_max_size = 9;
  s.seed = seed;
  return generate_scene(s);
}

ModelParams small_params(std::uint64_t seed = 0) {
  TrainConfig c;
  c.n_queries = 8;
  c.embed_dim = 16;
  c.proj_dim = 16;
  c.seed = seed;
  return init_params(16, c);
}

}  // namespace

TEST_CASE("match score") {
  const Tensor a = Tensor::vector({1, 0, 0});
  CHECK(match_score(a, a) == doctest::Approx(1.0));
  CHECK(match_score(a, Tensor::vector({-2, 0, 0})) == doctest::Approx(0.0));
  CHECK(match_score(a, Tensor::vector({0, 3, 0})) == doctest::Approx(0.5));
  CHECK_THROWS_AS(match_score(a, Tensor({3})), DegenerateInputError);
  CHECK_THROWS_AS(match_score(a, Tensor({4})), ShapeError);
  std::mt19937_64 rng(51);
  for (int i = 0; i < 200; ++i) {
    const Tensor u = oracle::random_tensor({7}, rng), v = oracle::random_tensor({7}, rng);
    const double s = match_score(u, v);
    CHECK(s == match_score(v, u));
    CHECK((s >= 0.0 && s <= 1.0));
  }
}

TEST_CASE("most confident query") {
  Tensor m({3, 4});
  for (std::size_t p = 0; p < 4; ++p) m.at(0, p) = 0.5f, m.at(1, p) = 0.75f, m.at(2, p) = 0.25f;
  CHECK(most_confident_query(m) == 1);  // 0.75 and 0.25 tie, lowest wins
  m.at(2, 0) = 0.0f;
  CHECK(most_confident_query(m) == 2);

  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor r = oracle::random_tensor({6, 10}, rng, 0, 1);
    std::size_t best = 0;
    double bm = -1;
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (std::size_t p = 0; p < 10; ++p) s += std::abs(2.0 * r.at(i, p) - 1.0);
      if (s > bm) bm = s, best = i;
    }
    CHECK(most_confident_query(r) == best);
  }
}

TEST_CASE("inference bank contract") {
  const VideoSample v = small_video(3);
  const ModelParams p = small_params();

  InferenceBank bank;
  const FramePrediction first = infer_frame(v.frames[0], p, bank);
  CHECK(first.confidence == 0.0);
  CHECK(!first.matched_index);
  CHECK(bank.size() == 1);
  CHECK(first.bank_size == 1);
  CHECK(first.mask.dims() == v.frames[0].gt_mask.dims());
  for (float x : first.mask.values()) CHECK((x >= 0.0f && x <= 1.0f));

  const FramePrediction again = infer_frame(v.frames[0], p, bank);
  CHECK(again.confidence == doctest::Approx(1.0));
  REQUIRE(again.matched_index);
  CHECK(*again.matched_index == 0);
  CHECK(bank.size() == 1);
  CHECK(again.mask.bit_equal(first.mask));

  // A threshold of 1 can never be exceeded, so every frame is appended.
  InferConfig strict;
  strict.threshold = 1.0;
  const auto preds = infer_video(v, p, strict);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(preds[i].bank_size == i + 1);
    CHECK(!preds[i].matched_index);
  }

  strict.max_bank = 2;
  const auto capped = infer_video(v, p, strict);
  CHECK(capped.back().bank_size == 2);

  const auto loose = infer_video(v, p);
  for (std::size_t i = 0; i < loose.size(); ++i) CHECK(loose[i].bank_size <= i + 1);
  const auto repeat = infer_video(v, p);
  for (std::size_t i = 0; i < loose.size(); ++i) {
    CHECK(loose[i].mask.bit_equal(repeat[i].mask));
    CHECK(loose[i].confidence == repeat[i].confidence);
  }

  CHECK_THROWS_AS(infer_video(VideoSample{}, p), ConfigError);
  InferConfig bad;
  bad.threshold = 1.5;
  CHECK_THROWS_AS(infer_video(v, p, bad), ConfigError);
}

TEST_CASE("low-confidence matches are not accepted") {
  // Two orthogonal stored embeddings and a query orthogonal to both: score 0.5.
  const VideoSample v = small_video(4, 2);
  ModelParams p = small_params();
  InferenceBank bank;
  const FramePrediction probe = infer_frame(v.frames[0], p, bank);
  bank.entries.clear();
  Tensor anti = probe.embedding;
  for (auto& x : anti.data()) x = -x;
  bank.entries.push_back(anti);
  InferConfig cfg;
  cfg.threshold = 0.1;
  const FramePrediction out = infer_frame(v.frames[0], p, bank, cfg);
  CHECK(out.confidence == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(!out.matched_index);
  CHECK(bank.size() == 2);
}

TEST_CASE("degenerate frames are skipped") {
  const VideoSample v = small_video(5, 2);
  ModelParams p = small_params();
  p.use_pos = false;
  p.use_sem = false;
  p.query_offsets = Tensor(p.query_offsets.dims());
  InferenceBank bank;
  const FramePrediction out = infer_frame(v.frames[0], p, bank);
  CHECK(out.skipped);
  CHECK(!out.reason.empty());
  CHECK(bank.size() == 0);
  for (float x : out.mask.values()) CHECK(x == 0.0f);
}

TEST_CASE("evaluation over videos") {
  const VideoSample v = small_video(6);
  const EvalReport r = evaluate_videos({v, small_video(7)}, small_params());
  CHECK(r.frames() == 12);
  CHECK((r.mae >= 0 && r.mae <= 1));
}
