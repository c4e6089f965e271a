#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fixsal/errors.hpp"
#include "fixsal/numerics.hpp"
#include "fixsal/scenegen.hpp"
#include "fixsal/slq.hpp"
#include "oracles.hpp"

using namespace fixsal;

namespace {

ProjectorParams random_projector(std::size_t d, std::size_t c, std::mt19937_64& rng) {
  return ProjectorParams{oracle::random_tensor({d, c}, rng)};
}

std::vector<double> relu_project(const Tensor& w, const Tensor& x) {
  std::vector<double> out(w.dim(0));
  for (std::size_t i = 0; i < w.dim(0); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < w.dim(1); ++j) s += double(w.at(i, j)) * x[j];
    out[i] = std::max(0.0, s);
  }
  return out;
}

double cos_d(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("non-local propagation") {
  const Tensor one({3, 1}, {1, -2, 0.5f});
  const Tensor y = nonlocal_propagate(one);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(2 * one[i]));
  CHECK(nonlocal_propagate(Tensor({4, 6})).bit_equal(Tensor({4, 6})));

  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor f = oracle::random_tensor({4, 6}, rng, -2, 2);
    const Tensor out = nonlocal_propagate(f);
    for (std::size_t p = 0; p < 6; ++p) {
      const auto col = oracle::attention_column(f, p);
      for (std::size_t ch = 0; ch < 4; ++ch) CHECK(out.at(ch, p) == doctest::Approx(col[ch]).epsilon(1e-5));
    }
  }
}

TEST_CASE("scribble feature") {
  Tensor f({3, 12});
  const float c[3] = {0.5f, -1.0f, 2.0f};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t p = 0; p < 12; ++p) f.at(ch, p) = c[ch];
  }
  Tensor one_px({12}), all_px = Tensor::filled({12}, 1.0f);
  one_px[5] = 1;
  const Tensor a = scribble_feature(f, one_px), b = scribble_feature(f, all_px);
  CHECK(cosine(a.data(), std::span<const float>(c, 3)) == doctest::Approx(1.0));
  CHECK(cosine(a, b) == doctest::Approx(1.0));

  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor r = oracle::random_tensor({4, 9}, rng);
    Tensor s({9});
    s[1] = s[7] = 1;
    Tensor g = r;
    for (std::size_t ch = 0; ch < 4; ++ch) {
      for (std::size_t p = 0; p < 9; ++p) g.at(ch, p) = r.at(ch, p) * s[p] + r.at(ch, p);
    }
    const auto y1 = oracle::attention_column(g, 1), y7 = oracle::attention_column(g, 7);
    const Tensor got = scribble_feature(r, s);
    for (std::size_t ch = 0; ch < 4; ++ch) CHECK(got[ch] == doctest::Approx((y1[ch] + y7[ch]) / 2).epsilon(1e-5));
  }
  CHECK_THROWS_AS(scribble_feature(f, Tensor({12})), DegenerateInputError);
}

TEST_CASE("mask head") {
  MaskHeadParams head{Tensor({2, 2}, {1, 0, 0, 1})};
  Tensor f({2, 5});
  for (std::size_t p = 0; p < 5; ++p) f.at(1, p) = float(p);
  const float q[2] = {1, 0};  // P q = e0, features live on e1
  const Tensor m1 = mask_head(f, q, head), m2 = mask_head(Tensor({2, 5}), q, head);
  for (float m : m1.values()) CHECK(m == 0.5f);
  for (float m : m2.values()) CHECK(m == 0.5f);

  std::mt19937_64 rng(23);
  const Tensor feat = oracle::random_tensor({6, 10}, rng, -2, 2);
  const MaskHeadParams h2{oracle::random_tensor({6, 4}, rng)};
  const Tensor query = oracle::random_tensor({4}, rng);
  const Tensor m = mask_head(feat, query.data(), h2);
  for (std::size_t p = 0; p < 10; ++p) {
    double z = 0;
    for (std::size_t ch = 0; ch < 6; ++ch) {
      double w = 0;
      for (std::size_t j = 0; j < 4; ++j) w += double(h2.projection.at(ch, j)) * query[j];
      z += w * feat.at(ch, p);
    }
    CHECK(m[p] == doctest::Approx(1 / (1 + std::exp(-z / std::sqrt(6.0)))).epsilon(1e-6));
  }
  CHECK_THROWS_AS(mask_head(feat, std::span<const float>(q, 2), h2), ShapeError);
}

TEST_CASE("query feature") {
  std::mt19937_64 rng(24);
  const Tensor f = oracle::random_tensor({3, 8}, rng);
  const Tensor uni = query_feature(f, Tensor::filled({8}, 0.3f));
  Tensor onehot({8});
  onehot[6] = 1;
  const Tensor col = query_feature(f, onehot);
  const Tensor w = oracle::random_tensor({8}, rng, 0, 1);
  const Tensor wm = query_feature(f, w);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double mean = 0, num = 0, den = 0;
    for (std::size_t p = 0; p < 8; ++p) {
      mean += f.at(ch, p) / 8.0;
      num += double(w[p]) * f.at(ch, p);
      den += w[p];
    }
    CHECK(uni[ch] == doctest::Approx(mean).epsilon(1e-6));
    CHECK(col[ch] == f.at(ch, 6));
    CHECK(wm[ch] == doctest::Approx(num / den).epsilon(1e-6));
  }
  CHECK_THROWS_AS(query_feature(f, Tensor({8})), DegenerateInputError);
}

TEST_CASE("semantic score") {
  std::mt19937_64 rng(25);
  const ProjectorParams proj = random_projector(5, 4, rng);
  const Tensor x = oracle::random_tensor({4}, rng, 0.1, 1);
  CHECK(semantic_score(x, x, ProjectorParams{Tensor({2, 4}, {1, 0, 0, 0, 0, 1, 0, 0})}) == doctest::Approx(1.0));
  const ProjectorParams eye{Tensor({2, 2}, {1, 0, 0, 1})};
  CHECK(semantic_score(Tensor::vector({1, 0}), Tensor::vector({0, 1}), eye) == 0.0);
  CHECK(semantic_score(Tensor::vector({-1, -1}), Tensor::vector({0, 1}), eye) == 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = oracle::random_tensor({4}, rng), b = oracle::random_tensor({4}, rng);
    const double expect = cos_d(relu_project(proj.weight, a), relu_project(proj.weight, b));
    CHECK(semantic_score(a, b, proj) == doctest::Approx(expect).epsilon(1e-6));
    const auto pa = relu_project(proj.weight, a);
    if (std::any_of(pa.begin(), pa.end(), [](double v) { return v > 0; })) {
      CHECK(semantic_score(a, a, proj) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("partial IoU") {
  Tensor scr({2, 2}, {1, 1, 1, 1});
  CHECK(partial_iou(Tensor::filled({2, 2}, 1.0f), scr) == 1.0);
  CHECK(partial_iou(Tensor({2, 2}), scr) == 0.0);
  CHECK(partial_iou(Tensor({2, 2}, {1, 0, 1, 0}), scr) == 0.5);
  CHECK_THROWS_AS(partial_iou(Tensor({2, 2}), Tensor({2, 2})), DegenerateInputError);

  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor s = oracle::random_binary({6, 6}, rng, 0.3);
    s[0] = 1;
    Tensor m = oracle::random_tensor({6, 6}, rng, 0, 1);
    const double base = partial_iou(m, s);
    CHECK(base == doctest::Approx(oracle::partial_iou_soft(m, s)).epsilon(1e-6));
    // Raising the mask on scribble pixels never lowers the score.
    Tensor up = m;
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (s[i] > 0.5f) up[i] = std::min(1.0f, up[i] + 0.1f);
    }
    CHECK(partial_iou(up, s) >= base);
  }
}

TEST_CASE("locality score") {
  Tensor gt({4, 4});
  for (std::size_t i : {5u, 6u, 9u, 10u}) gt[i] = 1;
  Tensor fg({4, 4}), bg({4, 4});
  fg[5] = fg[10] = 1;
  bg[0] = bg[15] = bg[3] = 1;
  CHECK(locality_score(gt, fg, bg) == 2.0);
  Tensor inv = gt;
  for (auto& v : inv.data()) v = 1 - v;
  CHECK(locality_score(inv, fg, bg) == 0.0);

  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor m = oracle::random_tensor({4, 4}, rng, 0, 1);
    Tensor comp = m;
    for (auto& v : comp.data()) v = 1 - v;
    const double expect = oracle::partial_iou_soft(m, fg) + oracle::partial_iou_soft(comp, bg);
    CHECK(locality_score(m, fg, bg) == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("query selection") {
  std::mt19937_64 rng(28);
  const Tensor f = oracle::random_tensor({4, 16}, rng);
  Tensor sfg({16}), sbg({16});
  sfg[1] = sfg[2] = 1;
  sbg[9] = sbg[12] = 1;
  const Tensor sf = scribble_feature(f, sfg);
  const ProjectorParams proj = random_projector(6, 4, rng);
  const MaskHeadParams head{oracle::random_tensor({4, 3}, rng)};

  const Tensor single = oracle::random_tensor({1, 3}, rng);
  CHECK(select_query(score_queries(f, single, head, sf, sfg, sbg, proj)).index == 0);

  Tensor tied({3, 3});
  const Tensor base = oracle::random_tensor({3}, rng);
  for (std::size_t r = 0; r < 3; ++r) std::copy(base.data().begin(), base.data().end(), tied.row(r).begin());
  CHECK(select_query(score_queries(f, tied, head, sf, sfg, sbg, proj)).index == 0);

  // Permuting the candidates moves the winner with them.
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor q = oracle::random_tensor({8, 3}, rng, -3, 3);
    const Selection s = select_query(score_queries(f, q, head, sf, sfg, sbg, proj));
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor pq({8, 3});
    for (std::size_t i = 0; i < 8; ++i) std::copy(q.row(perm[i]).begin(), q.row(perm[i]).end(), pq.row(i).begin());
    const Selection ps = select_query(score_queries(f, pq, head, sf, sfg, sbg, proj));
    CHECK(perm[ps.index] == s.index);
    CHECK(ps.query.bit_equal(s.query));
  }

  // Score invariants.
  const QuerySet qs = score_queries(f, oracle::random_tensor({5, 3}, rng), head, sf, sfg, sbg, proj);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    CHECK(qs.scores_sem[i] >= -1.0f);
    CHECK(qs.scores_sem[i] <= 1.0f);
    CHECK(qs.scores_loc[i] >= 0.0f);
    CHECK(qs.scores_loc[i] <= 2.0f);
  }
}

TEST_CASE("perfect mask beats a uniform one") {
  int wins = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    SceneConfig cfg;
    cfg.channels = 16;
    cfg.frames_per_video = 1;
    cfg.feature_separation = 4;
    cfg.noise_std = 1;
    cfg.seed = std::uint64_t(t);
    cfg.world_seed = std::uint64_t(t);
    const FrameSample fr = generate_scene(cfg).frames[0];
    std::mt19937_64 rng(std::uint64_t(t) + 1000);
    const ProjectorParams proj = random_projector(16, 16, rng);
    Tensor masks({2, fr.gt_mask.size()});
    std::fill(masks.row(0).begin(), masks.row(0).end(), 0.5f);
    std::copy(fr.gt_mask.data().begin(), fr.gt_mask.data().end(), masks.row(1).begin());
    const QuerySet qs = score_masks(fr.features, masks, scribble_feature(fr.features, fr.scribble_fg),
                                    fr.scribble_fg, fr.scribble_bg, proj);
    wins += select_query(qs).index == 1;
  }
  CHECK(wins >= 990);
}
