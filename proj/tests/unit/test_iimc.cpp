#include <doctest.h>

#include <cmath>
#include <deque>
#include <filesystem>
#include <random>

#include "fixsal/errors.hpp"
#include "fixsal/gradcheck.hpp"
#include "fixsal/iimc.hpp"
#include "fixsal/numerics.hpp"
#include "oracles.hpp"

using namespace fixsal;

namespace {

Tensor unit(std::size_t n, std::size_t i) {
  Tensor t({n});
  t[i] = 1;
  return t;
}

Tensor random_unit(std::size_t n, std::mt19937_64& rng) { return l2_normalize(oracle::random_tensor({n}, rng)); }

double intra_oracle(const ContrastiveBatch& b) {
  auto d = [&](const Tensor& x, const Tensor& y) { return dot(x.data(), y.data()) / b.temperature; };
  const double pos = std::exp(d(b.key_fg, b.ref_fg));
  double neg = 0;
  std::vector<const Tensor*> bs{&b.key_bg, &b.ref_bg};
  for (const auto& t : b.bank_negatives) bs.push_back(&t);
  for (const Tensor* a : {&b.key_fg, &b.ref_fg}) {
    for (const Tensor* x : bs) neg += std::exp(d(*a, *x));
  }
  return -std::log(pos / (pos + neg));
}

}  // namespace

TEST_CASE("foreground and background vectors") {
  std::mt19937_64 rng(31);
  const Tensor f = oracle::random_tensor({5, 12}, rng);
  CHECK_THROWS_AS(fg_bg_from_mask(f, Tensor::filled({12}, 1.0f)), DegenerateInputError);
  const FgBgVectors half = fg_bg_from_mask(f, Tensor::filled({12}, 0.5f));
  CHECK(cosine(half.fg, half.bg) == doctest::Approx(1.0));

  const Tensor m = oracle::random_tensor({12}, rng, 0, 1);
  const FgBgVectors v = fg_bg_from_mask(f, m);
  std::vector<double> fg(5), bg(5);
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t p = 0; p < 12; ++p) {
      fg[c] += double(m[p]) * f.at(c, p);
      bg[c] += (1.0 - m[p]) * f.at(c, p);
    }
  }
  double nf = 0, nb = 0;
  for (std::size_t c = 0; c < 5; ++c) nf += fg[c] * fg[c], nb += bg[c] * bg[c];
  for (std::size_t c = 0; c < 5; ++c) {
    CHECK(v.fg[c] == doctest::Approx(fg[c] / std::sqrt(nf)).epsilon(1e-5));
    CHECK(v.bg[c] == doctest::Approx(bg[c] / std::sqrt(nb)).epsilon(1e-5));
  }
  const FgBgVectors raw = fg_bg_from_mask(f, m, false);
  CHECK(norm(raw.fg.data()) == doctest::Approx(std::sqrt(nf)).epsilon(1e-5));
}

TEST_CASE("intra loss closed form") {
  ContrastiveBatch b;
  b.key_fg = b.ref_fg = unit(4, 0);
  b.key_bg = unit(4, 1);
  b.ref_bg = unit(4, 2);
  b.temperature = 1.0;
  const double e = std::exp(1.0);
  CHECK(intra_loss(b).loss == doctest::Approx(-std::log(e / (e + 4))).epsilon(1e-9));

  // Backgrounds pushed to the -80 logit limit.
  ContrastiveBatch lim;
  lim.key_fg = lim.ref_fg = unit(3, 0);
  Tensor anti = unit(3, 0);
  anti[0] = -1;
  lim.key_bg = lim.ref_bg = anti;
  lim.temperature = 1.0 / 80.0;
  const double l = intra_loss(lim).loss;
  CHECK(l >= 0.0);
  CHECK(l < 1e-12);
  lim.temperature = 0.01;
  CHECK_THROWS_AS(intra_loss(lim), NumericError);
}

TEST_CASE("intra loss properties") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    ContrastiveBatch b;
    b.key_fg = random_unit(8, rng);
    b.ref_fg = random_unit(8, rng);
    b.key_bg = random_unit(8, rng);
    b.ref_bg = random_unit(8, rng);
    for (int i = 0; i < 3; ++i) b.bank_negatives.push_back(random_unit(8, rng));
    b.temperature = 0.5;
    const IntraLoss out = intra_loss(b);
    CHECK(out.loss >= 0.0);
    CHECK(out.loss == doctest::Approx(intra_oracle(b)).epsilon(1e-9));
    CHECK(out.grad_bank.size() == 3);
  }

  // Raising the positive dot alone lowers the loss.
  auto loss_at = [&](double pos_dot) {
    std::vector<double> kf{1, 0, 0, 0}, rf{pos_dot, std::sqrt(1 - pos_dot * pos_dot), 0, 0};
    std::vector<double> kb{0, 0, 1, 0}, rb{0, 0, 0, 1};
    return kernels::intra(kf, kb, rf, rb, {}, 1.0, false).loss;
  };
  CHECK(loss_at(0.5 + 1e-6) < loss_at(0.5));

  // Halving the temperature widens the aligned/anti-aligned gap.
  ContrastiveBatch aligned, anti;
  aligned.key_fg = aligned.ref_fg = unit(4, 0);
  aligned.key_bg = aligned.ref_bg = unit(4, 1);
  anti.key_fg = unit(4, 0);
  anti.ref_fg = unit(4, 1);
  anti.key_bg = unit(4, 1);
  anti.ref_bg = unit(4, 0);
  auto gap = [&](double tau) {
    aligned.temperature = anti.temperature = tau;
    return std::abs(intra_loss(aligned).loss - intra_loss(anti).loss);
  };
  for (double tau : {2.0, 1.0, 0.5, 0.2}) CHECK(gap(tau / 2) > gap(tau));
}

TEST_CASE("inter loss") {
  const Tensor i = unit(3, 0);
  const double e = std::exp(1.0);
  const InterLoss one = inter_loss(i, {i}, {unit(3, 1)}, 1.0);
  CHECK(one.loss == doctest::Approx(-std::log(e / (e + 1))).epsilon(1e-9));
  CHECK(inter_loss(i, {i, unit(3, 2)}, {}, 0.3).loss == 0.0);
  CHECK_THROWS_AS(inter_loss(i, {}, {unit(3, 1)}), DegenerateInputError);
  CHECK_THROWS_AS(inter_loss(i, {Tensor({4})}, {}), ShapeError);
}

TEST_CASE("contrastive gradients match finite differences") {
  GradcheckOptions o;
  o.instances = 20;
  o.seed = 7;
  for (const auto& e : run_gradcheck(o)) {
    INFO(e.loss << " instance " << e.instance << " " << e.tensor << "[" << e.index << "]");
    CHECK(e.check.passed);
  }
}

TEST_CASE("frame bank FIFO") {
  FrameBank bank(2, 2);
  bank.push(Tensor::vector({1, 1}));
  CHECK(bank.size() == 1);
  bank.push(Tensor::vector({2, 2}));
  bank.push(Tensor::vector({3, 3}));
  const auto snap = bank.snapshot();
  REQUIRE(snap.size() == 2);
  CHECK(snap[0][0] == 2);
  CHECK(snap[1][0] == 3);
  CHECK_THROWS_AS(bank.push(Tensor::vector({1, 2, 3})), ShapeError);

  std::mt19937_64 rng(33);
  FrameBank big(128, 3);
  std::deque<Tensor> replay;
  for (int i = 0; i < 1000; ++i) {
    const Tensor v = oracle::random_tensor({3}, rng);
    big.push(v);
    replay.push_back(v);
    if (replay.size() > 128) replay.pop_front();
  }
  const auto s = big.snapshot();
  REQUIRE(s.size() == replay.size());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i].bit_equal(replay[i]));

  const auto dir = std::filesystem::temp_directory_path() / "fixsal_unit" / "banks";
  std::filesystem::create_directories(dir);
  big.save(dir / "frame");
  CHECK(FrameBank::load(dir / "frame") == big);
}

TEST_CASE("video bank partition") {
  VideoBank only(8, 2);
  for (int i = 0; i < 3; ++i) only.push(Tensor::vector({float(i), 1}), 5);
  CHECK(only.sample(5, 10).negatives.empty());
  CHECK(only.sample(5, 10).positives.size() == 3);
  CHECK(only.sample(6, 10).positives.empty());

  std::mt19937_64 rng(34);
  VideoBank bank(50, 2);
  std::deque<std::pair<Tensor, std::int64_t>> replay;
  for (int i = 0; i < 300; ++i) {
    const Tensor v = oracle::random_tensor({2}, rng);
    const std::int64_t id = std::int64_t(rng() % 4);
    bank.push(v, id);
    replay.emplace_back(v, id);
    if (replay.size() > 50) replay.pop_front();
    const std::int64_t cur = std::int64_t(rng() % 5);
    const std::size_t max_neg = rng() % 20;
    std::vector<Tensor> pos, neg;
    for (const auto& [t, vid] : replay) (vid == cur ? pos : neg).push_back(t);
    if (neg.size() > max_neg) neg.erase(neg.begin(), neg.end() - std::ptrdiff_t(max_neg));
    const VideoBankSample s = bank.sample(cur, max_neg);
    REQUIRE(s.positives.size() == pos.size());
    REQUIRE(s.negatives.size() == neg.size());
    for (std::size_t k = 0; k < pos.size(); ++k) CHECK(s.positives[k].bit_equal(pos[k]));
    for (std::size_t k = 0; k < neg.size(); ++k) CHECK(s.negatives[k].bit_equal(neg[k]));
  }
  const auto dir = std::filesystem::temp_directory_path() / "fixsal_unit" / "banks";
  std::filesystem::create_directories(dir);
  bank.save(dir / "video");
  CHECK(VideoBank::load(dir / "video") == bank);
}
