#include "fixsal/pse.hpp"

#include <cmath>
#include <random>

#include "fixsal/log.hpp"
#include "fixsal/scenegen.hpp"

namespace fixsal {

Point2 fixation_centroid(const Tensor& fixation) {
  if (fixation.rank() != 2) throw ShapeError("fixation must be HxW");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t r = 0; r < fixation.dim(0); ++r) {
    for (std::size_t c = 0; c < fixation.dim(1); ++c) {
      const double v = fixation.at(r, c);
      sw += v;
      sx += v * double(c);
      sy += v * double(r);
    }
  }
  if (!(sw > 0)) throw DegenerateInputError("fixation heatmap has no mass");
  return {sx / sw, sy / sw};
}

Point2 fixation_centroid_or_center(const Tensor& fixation) {
  try {
    return fixation_centroid(fixation);
  } catch (const DegenerateInputError&) {
    log_warn("empty fixation map, using the frame center");
    return {(double(fixation.dim(1)) - 1) / 2.0, (double(fixation.dim(0)) - 1) / 2.0};
  }
}

Tensor positional_encoding_1d(double t, std::size_t d_half) {
  if (d_half == 0 || d_half % 2 != 0) throw ShapeError("positional encoding width must be even and positive");
  Tensor out({d_half});
  for (std::size_t k = 0; 2 * k < d_half; ++k) {
    const double omega = std::pow(10000.0, -2.0 * double(k) / double(d_half));
    out[2 * k] = static_cast<float>(std::sin(omega * t));
    out[2 * k + 1] = static_cast<float>(std::cos(omega * t));
  }
  return out;
}

Tensor positional_encoding_2d(double x, double y, std::size_t d) {
  if (d % 4 != 0 || d == 0) throw ShapeError("2D positional encoding needs d divisible by 4");
  const Tensor px = positional_encoding_1d(x, d / 2);
  const Tensor py = positional_encoding_1d(y, d / 2);
  Tensor out({d});
  std::copy(px.data().begin(), px.data().end(), out.data().begin());
  std::copy(py.data().begin(), py.data().end(), out.data().begin() + d / 2);
  return out;
}

Tensor init_semantic_embedding(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x5e3));
  std::normal_distribution<double> gauss(0.0, 0.02);
  Tensor e({d});
  for (auto& v : e.data()) v = static_cast<float>(gauss(rng));
  return e;
}

Tensor init_queries(const Tensor& e_pos, const Tensor& e_sem, std::size_t n_queries) {
  if (e_pos.rank() != 1 || e_pos.dims() != e_sem.dims()) {
    throw ShapeError("position and semantic embeddings must be vectors of equal length");
  }
  if (n_queries == 0) throw ShapeError("need at least one query");
  const std::size_t d = e_pos.size();
  Tensor q({n_queries, d});
  for (std::size_t i = 0; i < n_queries; ++i) {
    auto row = q.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = e_pos[j] + e_sem[j];
  }
  return q;
}

Tensor query_offsets(std::size_t n_queries, std::size_t d, std::uint64_t seed, float scale) {
  std::mt19937_64 rng(derive_seed(seed, 0x0ff5e7));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor out({n_queries, d});
  for (auto& v : out.data()) v = static_cast<float>(scale * gauss(rng));
  return out;
}

Tensor add_offsets(const Tensor& queries, const Tensor& offsets) {
  if (queries.dims() != offsets.dims()) throw ShapeError("query offsets shape mismatch");
  Tensor out = queries;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += offsets[i];
  return out;
}

}  // namespace fixsal
