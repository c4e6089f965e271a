#include "fixsal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fixsal {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects rank-2 operands");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul inner dims differ: " + a.shape_string() + " x " + b.shape_string());
  }
  Tensor out({m, n});
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += double(pa[i * k + p]) * double(pb[p * n + j]);
      po[i * n + j] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a rank-2 tensor");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor softmax(const Tensor& v, float temperature) {
  if (v.empty()) throw ShapeError("softmax of an empty vector");
  if (!(temperature > 0.0f)) throw NumericError("softmax temperature must be positive");
  const auto x = v.data();
  double mx = -INFINITY;
  for (float e : x) mx = std::max(mx, double(e) / temperature);
  std::vector<double> ex(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ex[i] = std::exp(double(x[i]) / temperature - mx);
    sum += ex[i];
  }
  Tensor out(v.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(ex[i] / sum);
  return out;
}

double dot(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) throw ShapeError("dot of vectors with different lengths");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += double(u[i]) * double(v[i]);
  return acc;
}

double norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const float> u, std::span<const float> v) {
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw DegenerateInputError("cosine of a zero-norm vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

Tensor l2_normalize(const Tensor& v) {
  const double n = norm(v.data());
  if (!(n > 1e-12)) throw DegenerateInputError("cannot normalize a near-zero vector");
  Tensor out(v.dims());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(double(v[i]) / n);
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(sigmoid(double(x[i])));
  return out;
}

void require_finite(const Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, float eps) {
  if (!(eps >= 1e-4f && eps <= 1e-2f)) throw NumericError("finite difference eps must lie in [1e-4, 1e-2]");
  Tensor grad(x.dims());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float xi = x[i];
    const float hi = xi + eps;
    const float lo = xi - eps;
    probe[i] = hi;
    const double f_hi = f(probe);
    probe[i] = lo;
    const double f_lo = f(probe);
    probe[i] = xi;
    if (!std::isfinite(f_hi) || !std::isfinite(f_lo)) {
      throw NumericError("non-finite function value while differencing coordinate " + std::to_string(i));
    }
    // hi - lo is exact in float (Sterbenz), so this is the true step.
    const double step = double(hi) - double(lo);
    grad[i] = static_cast<float>((f_hi - f_lo) / step);
  }
  return grad;
}

GradCheck compare_gradients(const Tensor& analytic, const Tensor& numeric, double rel_tol,
                            double abs_floor) {
  if (analytic.dims() != numeric.dims()) throw ShapeError("gradient shapes differ");
  GradCheck out;
  const double floor_scale = abs_floor / rel_tol;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double diff = std::abs(a - n);
    const double denom = std::max({std::abs(a), std::abs(n), floor_scale});
    const double err = diff / denom;
    if (err > out.worst_error || i == 0) {
      out.worst_error = err;
      out.worst_abs = diff;
      out.worst_index = i;
    }
  }
  out.passed = out.worst_error <= rel_tol;
  return out;
}

}  // namespace fixsal
