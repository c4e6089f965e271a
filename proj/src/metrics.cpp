#include "fixsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fixsal/errors.hpp"

namespace fixsal {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_pair(const Tensor& pred, const Tensor& gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw ShapeError("prediction " + pred.shape_string() + " does not match ground truth " + gt.shape_string());
  }
}


double object_score(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

double s_object(const Tensor& pred, const Tensor& gt) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > 0.5f) {
      fg.push_back(pred[i]);
    } else {
      bg.push_back(1.0 - pred[i]);
    }
  }
  const double u = double(fg.size()) / double(gt.size());
  return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

double block_ssim(const Tensor& pred, const Tensor& gt, std::size_t width, std::size_t r0, std::size_t r1,
                  std::size_t c0, std::size_t c1) {
  const double n = double((r1 - r0) * (c1 - c0));
  if (n == 0) return 0.0;
  double x = 0.0, y = 0.0;
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      x += pred[r * width + c];
      y += gt[r * width + c];
    }
  }
  x /= n;
  y /= n;
  double sx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      const double dx = pred[r * width + c] - x;
      const double dy = gt[r * width + c] - y;
      sx += dx * dx;
      sy += dy * dy;
      sxy += dx * dy;
    }
  }
  sx /= n - 1 + kEps;
  sy /= n - 1 + kEps;
  sxy /= n - 1 + kEps;
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

double s_region(const Tensor& pred, const Tensor& gt) {
  const std::size_t h = gt.dim(0), w = gt.dim(1);
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double g = gt[r * w + c];
      total += g;
      sx += g * double(c + 1);
      sy += g * double(r + 1);
    }
  }
  // Split after the (1-based) rounded centroid; the left/top blocks hold X columns / Y rows.
  const auto cx = static_cast<std::size_t>(total > 0 ? std::lround(sx / total) : std::lround(w / 2.0));
  const auto cy = static_cast<std::size_t>(total > 0 ? std::lround(sy / total) : std::lround(h / 2.0));
  const std::size_t x = std::min(cx, w), y = std::min(cy, h);
  const double area = double(h * w);
  const double w1 = double(x * y) / area;
  const double w2 = double((w - x) * y) / area;
  const double w3 = double(x * (h - y)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  return w1 * block_ssim(pred, gt, w, 0, y, 0, x) + w2 * block_ssim(pred, gt, w, 0, y, x, w) +
         w3 * block_ssim(pred, gt, w, y, h, 0, x) + w4 * block_ssim(pred, gt, w, y, h, x, w);
}

}  // namespace

double mae(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(double(pred[i]) - double(gt[i]));
  return acc / double(pred.size());
}

double f_measure(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  double mean = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mean += pred[i];
    if (gt[i] > 0.5f) ++positives;
  }
  if (positives == 0) throw DegenerateInputError("f_measure: ground truth has no foreground");
  mean /= double(pred.size());
  const double threshold = std::min(2.0 * mean, 1.0 - 1e-6);
  std::size_t tp = 0, predicted = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (double(pred[i]) >= threshold) {
      ++predicted;
      if (gt[i] > 0.5f) ++tp;
    }
  }
  if (tp == 0) return 0.0;
  const double precision = double(tp) / double(predicted);
  const double recall = double(tp) / double(positives);
  return (1.0 + kBetaSquared) * precision * recall / (kBetaSquared * precision + recall);
}

double s_measure(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  if (gt.rank() != 2 || pred.dims() != gt.dims()) throw ShapeError("s_measure needs two H x W maps");
  double y = 0.0, x = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    y += gt[i];
    x += pred[i];
  }
  y /= double(gt.size());
  x /= double(gt.size());
  if (y == 0.0) return 1.0 - x;
  if (y == 1.0) return x;
  const double q = kStructureAlpha * s_object(pred, gt) + (1.0 - kStructureAlpha) * s_region(pred, gt);
  return std::max(q, 0.0);
}

void EvalReport::add(const Tensor& pred, const Tensor& gt) {
  s_series.push_back(fixsal::s_measure(pred, gt));
  f_series.push_back(fixsal::f_measure(pred, gt));
  mae_series.push_back(fixsal::mae(pred, gt));
}

void EvalReport::finalize() {
  auto mean = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / double(v.size());
  };
  s_measure = mean(s_series);
  f_measure = mean(f_series);
  mae = mean(mae_series);
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["s_measure"] = s_measure;
  j["f_measure_adaptive"] = f_measure;
  j["mae"] = mae;
  j["frames"] = frames();
  j["per_frame"] = {{"s_measure", s_series}, {"f_measure_adaptive", f_series}, {"mae", mae_series}};
  return j.dump(2) + "\n";
}

std::string EvalReport::to_csv(const std::string& method) const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "method,S_alpha,F_beta_adaptive,MAE\n" << method << "," << s_measure << "," << f_measure << "," << mae << "\n";
  return os.str();
}

EvalReport evaluate(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts) {
  if (preds.size() != gts.size()) throw ShapeError("evaluate: prediction and ground-truth counts differ");
  EvalReport r;
  for (std::size_t i = 0; i < preds.size(); ++i) r.add(preds[i], gts[i]);
  r.finalize();
  return r;
}

}  // namespace fixsal
