#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fixsal/tensor.hpp"

namespace fixsal {

// Dense math over Tensor. All reductions accumulate in double, in index
// order, so results are reproducible bit-for-bit on a given platform.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Softmax of v/temperature, computed with max subtraction.
Tensor softmax(const Tensor& v, float temperature = 1.0f);

double dot(std::span<const float> u, std::span<const float> v);
double norm(std::span<const float> v);

/// Cosine similarity clamped to [-1, 1]. Throws DegenerateInputError on a zero-norm input.
double cosine(std::span<const float> u, std::span<const float> v);
inline double cosine(const Tensor& u, const Tensor& v) { return cosine(u.data(), v.data()); }

Tensor l2_normalize(const Tensor& v);

/// Elementwise logistic function.
Tensor sigmoid(const Tensor& x);
double sigmoid(double x);

/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// Throws NumericError if any element of `t` is NaN or infinite.
void require_finite(const Tensor& t, const char* what);

using ScalarFn = std::function<double(const Tensor&)>;

/// Central-difference gradient of `f` at `x`.
///
/// Each coordinate is perturbed to float(x_i + eps) and float(x_i - eps) and the
/// difference quotient uses the realized float step, so the float rounding of
/// the perturbed point does not bias the estimate.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, float eps = 1e-3f);

struct GradCheck {
  double worst_error = 0.0;   // |analytic - numeric| / max(|analytic|, |numeric|)
  double worst_abs = 0.0;     // absolute difference at the worst coordinate
  std::size_t worst_index = 0;
  bool passed = true;
};

/// Coordinate passes when |a - n| <= max(rel_tol * max(|a|, |n|), abs_floor).
GradCheck compare_gradients(const Tensor& analytic, const Tensor& numeric,
                            double rel_tol = 1e-3, double abs_floor = 1e-6);

}  // namespace fixsal
