#pragma once

#include <cstddef>
#include <cstdint>

#include "fixsal/tensor.hpp"

namespace fixsal {

// Fixation-guided query initialization: the fixation heatmap is reduced to one
// point, sinusoidally encoded, and added to a learnable semantic embedding.

struct Point2 {
  double x = 0;  // column
  double y = 0;  // row
};

/// Intensity-weighted centroid. Throws DegenerateInputError if the heatmap sums to zero.
Point2 fixation_centroid(const Tensor& fixation);

/// Like fixation_centroid, but an empty heatmap yields the frame center and a warning.
Point2 fixation_centroid_or_center(const Tensor& fixation);

/// [sin(w_0 t), cos(w_0 t), sin(w_1 t), ...] with w_k = 10000^(-2k/d_half).
Tensor positional_encoding_1d(double t, std::size_t d_half);

/// Concatenation of the x encoding then the y encoding, each of length d/2.
Tensor positional_encoding_2d(double x, double y, std::size_t d);

/// Draws e_sem ~ N(0, 0.02^2).
Tensor init_semantic_embedding(std::size_t d, std::uint64_t seed);

/// n_queries identical rows, each e_pos + e_sem.
Tensor init_queries(const Tensor& e_pos, const Tensor& e_sem, std::size_t n_queries);

/// Fixed per-query symmetry-breaking offsets, N(0,1) scaled by `scale`.
Tensor query_offsets(std::size_t n_queries, std::size_t d, std::uint64_t seed, float scale = 0.01f);

/// Row-wise q_i + offset_i.
Tensor add_offsets(const Tensor& queries, const Tensor& offsets);

}  // namespace fixsal
