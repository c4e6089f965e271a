#pragma once

#include <string>
#include <vector>

#include "fixsal/tensor.hpp"

namespace fixsal {

inline constexpr double kBetaSquared = 0.3;
inline constexpr double kStructureAlpha = 0.5;

/// Mean |pred - gt|.
double mae(const Tensor& pred, const Tensor& gt);

/// Adaptive F-measure: pred >= min(2 mean(pred), 1 - 1e-6) is positive.
double f_measure(const Tensor& pred, const Tensor& gt);

/// Structure measure, 0.5 S_object + 0.5 S_region. Both maps must be H x W.
double s_measure(const Tensor& pred, const Tensor& gt);

struct EvalReport {
  double s_measure = 0.0;
  double f_measure = 0.0;
  double mae = 0.0;
  std::vector<double> s_series, f_series, mae_series;
  std::size_t frames() const { return mae_series.size(); }

  void add(const Tensor& pred, const Tensor& gt);
  /// Recomputes the means from the per-frame series.
  void finalize();
  std::string to_json() const;
  /// Header row plus one row labelled `method`.
  std::string to_csv(const std::string& method) const;
};

EvalReport evaluate(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts);

}  // namespace fixsal
