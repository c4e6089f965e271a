#include <doctest.h>

#include <cmath>
#include <random>

#include "fixsal/errors.hpp"
#include "fixsal/numerics.hpp"
#include "oracles.hpp"

using namespace fixsal;

TEST_CASE("matmul identity, zero and triple-loop oracle") {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(matmul(eye, a).bit_equal(a));
  const Tensor z = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}));
  CHECK(z.bit_equal(Tensor({2, 1})));

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = oracle::random_tensor({3, 4}, rng), y = oracle::random_tensor({4, 2}, rng);
    CHECK(matmul(x, y).bit_equal(oracle::matmul(x, y)));
  }
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST_CASE("softmax") {
  const Tensor a = softmax(Tensor::vector({0, 0}));
  CHECK(a[0] == doctest::Approx(0.5));
  const Tensor b = softmax(Tensor::vector({7, 7, 7}), 0.3f);
  for (float v : b.data()) CHECK(v == doctest::Approx(1.0 / 3.0));
  const Tensor c = softmax(Tensor::vector({1, 2, 3}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(c[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-6));
  CHECK(c[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-6));

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor v = oracle::random_tensor({17}, rng, -50, 50);
    double s = 0.0;
    const Tensor sm = softmax(v, 0.5f);
    for (float x : sm.values()) s += x;
    CHECK(std::abs(s - 1.0) < 1e-5);
  }
  CHECK_THROWS_AS(softmax(Tensor::vector({1}), 0.0f), NumericError);
  CHECK_THROWS_AS(softmax(Tensor(), 1.0f), ShapeError);
}

TEST_CASE("cosine and normalization") {
  const Tensor u = Tensor::vector({1, 2}), v = Tensor::vector({2, 1});
  CHECK(cosine(u, u) == doctest::Approx(1.0));
  CHECK(cosine(Tensor::vector({1, 0}), Tensor::vector({0, 1})) == 0.0);
  CHECK(cosine(u, v) == doctest::Approx(0.8));
  CHECK_THROWS_AS(cosine(u, Tensor::vector({0, 0})), DegenerateInputError);

  const Tensor n = l2_normalize(Tensor::vector({3, 4}));
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK(n[1] == doctest::Approx(0.8));
  CHECK(l2_normalize(n).bit_equal(n));
  CHECK_THROWS_AS(l2_normalize(Tensor::vector({0, 1e-14f})), DegenerateInputError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor a = oracle::random_tensor({9}, rng), b = oracle::random_tensor({9}, rng);
    Tensor as = a, bs = b;
    const double alpha = scale(rng), beta = scale(rng);
    for (auto& x : as.data()) x = static_cast<float>(x * alpha);
    for (auto& x : bs.data()) x = static_cast<float>(x * beta);
    CHECK(std::abs(cosine(a, b) - cosine(as, bs)) < 1e-5);
    const Tensor na = l2_normalize(a);
    CHECK(std::abs(norm(na.data()) - 1.0) < 1e-5);
    const double len = norm(a.data());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(na[i] == doctest::Approx(a[i] / len).epsilon(1e-6));
  }
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  const Tensor x = Tensor::vector({-3, -0.5f, 0, 1, 4});
  const Tensor s = sigmoid(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(sigmoid(double(x[i])) + sigmoid(-double(x[i])) == doctest::Approx(1.0));
    CHECK(s[i] > 0.0f);
    CHECK(s[i] < 1.0f);
  }
}

TEST_CASE("finite differences") {
  const Tensor x = Tensor::vector({0.3f, -1.2f, 2.0f});
  const Tensor g = finite_diff_grad([](const Tensor& t) {
    double s = 0.0;
    for (float v : t.data()) s += v;
    return s;
  }, x);
  for (float v : g.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));

  const Tensor q = finite_diff_grad([](const Tensor& t) { return dot(t.data(), t.data()); }, Tensor::vector({1, 2}));
  CHECK(q[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(q[1] == doctest::Approx(4.0).epsilon(1e-6));

  // Random quadratics x^T A x + b^T x: central differences are exact up to rounding.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = oracle::random_tensor({5, 5}, rng), b = oracle::random_tensor({5}, rng);
    const Tensor p = oracle::random_tensor({5}, rng, -3, 3);
    auto f = [&](const Tensor& t) {
      double s = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        s += double(b[i]) * t[i];
        for (std::size_t j = 0; j < 5; ++j) s += double(t[i]) * a.at(i, j) * t[j];
      }
      return s;
    };
    const Tensor num = finite_diff_grad(f, p, 1e-3f);
    for (std::size_t i = 0; i < 5; ++i) {
      double an = b[i];
      for (std::size_t j = 0; j < 5; ++j) an += (double(a.at(i, j)) + a.at(j, i)) * p[j];
      CHECK(std::abs(an - num[i]) < 1e-6 * std::max(1.0, std::abs(an)) + 1e-6);
    }
  }

  CHECK_THROWS_AS(finite_diff_grad([](const Tensor&) { return NAN; }, x), NumericError);
  CHECK_THROWS_AS(finite_diff_grad([](const Tensor&) { return 0.0; }, x, 1e-1f), NumericError);
}

TEST_CASE("gradient comparison tolerance") {
  const Tensor a = Tensor::vector({1.0f, 0.0f, 100.0f});
  const Tensor good = Tensor::vector({1.0005f, 5e-7f, 100.05f});
  CHECK(compare_gradients(a, good).passed);
  const Tensor bad = Tensor::vector({1.0f, 0.0f, 100.2f});
  const GradCheck c = compare_gradients(a, bad);
  CHECK_FALSE(c.passed);
  CHECK(c.worst_index == 2);
}
