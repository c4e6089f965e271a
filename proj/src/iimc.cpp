#include "fixsal/iimc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fixsal/numerics.hpp"
#include "fixsal/tensor_io.hpp"

namespace fixsal {
namespace {

std::vector<double> to_double(const Tensor& t) { return std::vector<double>(t.data().begin(), t.data().end()); }

Tensor to_tensor(std::span<const double> v) {
  Tensor t({v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

double dotd(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double checked_logit(double dot_value, double tau) {
  const double z = dot_value / tau;
  if (!std::isfinite(z) || std::abs(z) > kMaxLogit) {
    throw NumericError("contrastive logit " + std::to_string(z) + " exceeds the safe range; normalize inputs");
  }
  return z;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void require_dim(const Tensor& t, std::size_t dim, const char* what) {
  if (t.rank() != 1 || t.size() != dim) {
    throw ShapeError(std::string(what) + " must be a vector of length " + std::to_string(dim));
  }
}

}  // namespace

namespace kernels {

double normalize(std::span<const double> v, std::vector<double>& out) {
  const double n = std::sqrt(dotd(v, v));
  if (!(n > 1e-12)) throw DegenerateInputError("cannot normalize a near-zero vector");
  out.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return n;
}

std::vector<double> normalize_backward(std::span<const double> unit, double norm, std::span<const double> g) {
  const double ug = dotd(unit, g);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = (g[i] - unit[i] * ug) / norm;
  return out;
}

IntraOut intra(std::span<const double> key_fg, std::span<const double> key_bg, std::span<const double> ref_fg,
               std::span<const double> ref_bg, std::span<const double> bank, double tau, bool bank_grads) {
  if (!(tau > 0)) throw NumericError("temperature must be positive");
  const std::size_t c = key_fg.size();
  if (key_bg.size() != c || ref_fg.size() != c || ref_bg.size() != c || bank.size() % c != 0) {
    throw ShapeError("contrastive batch vectors differ in length");
  }
  const std::size_t n_bank = bank.size() / c;
  const std::size_t n_b = 2 + n_bank;
  auto b_vec = [&](std::size_t j) -> std::span<const double> {
    if (j == 0) return key_bg;
    if (j == 1) return ref_bg;
    return bank.subspan((j - 2) * c, c);
  };

  const double s_pos = checked_logit(dotd(key_fg, ref_fg), tau);
  // Row 0: a = key_fg, row 1: a = ref_fg.
  std::vector<double> s(2 * n_b);
  double mx = s_pos;
  for (std::size_t j = 0; j < n_b; ++j) {
    s[j] = checked_logit(dotd(key_fg, b_vec(j)), tau);
    s[n_b + j] = checked_logit(dotd(ref_fg, b_vec(j)), tau);
    mx = std::max({mx, s[j], s[n_b + j]});
  }
  double z = std::exp(s_pos - mx);
  for (double v : s) z += std::exp(v - mx);

  IntraOut out;
  out.loss = std::log(z) + mx - s_pos;
  const double w_pos = std::exp(s_pos - mx) / z;
  out.g_key_fg.assign(c, 0.0);
  out.g_ref_fg.assign(c, 0.0);
  out.g_key_bg.assign(c, 0.0);
  out.g_ref_bg.assign(c, 0.0);
  if (bank_grads) out.g_bank.assign(bank.size(), 0.0);
  axpy((w_pos - 1.0) / tau, ref_fg, out.g_key_fg);
  axpy((w_pos - 1.0) / tau, key_fg, out.g_ref_fg);
  for (std::size_t j = 0; j < n_b; ++j) {
    const double wk = std::exp(s[j] - mx) / z / tau;
    const double wr = std::exp(s[n_b + j] - mx) / z / tau;
    axpy(wk, b_vec(j), out.g_key_fg);
    axpy(wr, b_vec(j), out.g_ref_fg);
    std::span<double> gb;
    if (j == 0) {
      gb = out.g_key_bg;
    } else if (j == 1) {
      gb = out.g_ref_bg;
    } else if (bank_grads) {
      gb = std::span<double>(out.g_bank).subspan((j - 2) * c, c);
    } else {
      continue;
    }
    axpy(wk, key_fg, gb);
    axpy(wr, ref_fg, gb);
  }
  return out;
}

InterOut inter(std::span<const double> anchor, std::span<const double> positives,
               std::span<const double> negatives, double tau) {
  if (!(tau > 0)) throw NumericError("temperature must be positive");
  const std::size_t d = anchor.size();
  if (d == 0 || positives.size() % d != 0 || negatives.size() % d != 0) {
    throw ShapeError("inter-video loss vectors differ in length");
  }
  const std::size_t n_pos = positives.size() / d;
  const std::size_t n_neg = negatives.size() / d;
  if (n_pos == 0) throw DegenerateInputError("inter-video loss needs at least one positive");

  std::vector<double> s_neg(n_neg);
  double neg_max = -INFINITY;
  for (std::size_t k = 0; k < n_neg; ++k) {
    s_neg[k] = checked_logit(dotd(anchor, negatives.subspan(k * d, d)), tau);
    neg_max = std::max(neg_max, s_neg[k]);
  }

  InterOut out;
  out.g_anchor.assign(d, 0.0);
  out.g_positives.assign(positives.size(), 0.0);
  out.g_negatives.assign(negatives.size(), 0.0);
  if (n_neg == 0) return out;  // every term is -log(1)

  // Shared negative weights relative to neg_max; rescaled per positive below.
  std::vector<double> e_neg(n_neg);
  double sum_neg = 0.0;
  for (std::size_t k = 0; k < n_neg; ++k) {
    e_neg[k] = std::exp(s_neg[k] - neg_max);
    sum_neg += e_neg[k];
  }
  std::vector<double> neg_weight(n_neg, 0.0);  // sum over positives of w_{p,n}
  const double inv_p = 1.0 / double(n_pos);
  double loss = 0.0;
  for (std::size_t j = 0; j < n_pos; ++j) {
    const auto p = positives.subspan(j * d, d);
    const double s_p = checked_logit(dotd(anchor, p), tau);
    const double m = std::max(s_p, neg_max);
    const double e_p = std::exp(s_p - m);
    const double neg_part = sum_neg * std::exp(neg_max - m);
    const double z = e_p + neg_part;
    loss += std::log(z) + m - s_p;
    const double w_p = e_p / z;
    axpy(inv_p * (w_p - 1.0) / tau, p, out.g_anchor);
    axpy(inv_p * (w_p - 1.0) / tau, anchor, std::span<double>(out.g_positives).subspan(j * d, d));
    const double neg_scale = std::exp(neg_max - m) / z;
    for (std::size_t k = 0; k < n_neg; ++k) neg_weight[k] += inv_p * e_neg[k] * neg_scale;
  }
  for (std::size_t k = 0; k < n_neg; ++k) {
    axpy(neg_weight[k] / tau, negatives.subspan(k * d, d), out.g_anchor);
    axpy(neg_weight[k] / tau, anchor, std::span<double>(out.g_negatives).subspan(k * d, d));
  }
  out.loss = loss * inv_p;
  return out;
}

}  // namespace kernels

FgBgVectors fg_bg_from_mask(const Tensor& features, const Tensor& mask, bool normalize) {
  const FeatureView f = feature_view(features);
  if (mask.size() != f.pixels) throw ShapeError("mask pixel count does not match the feature map");
  std::vector<double> fg(f.channels, 0.0), bg(f.channels, 0.0);
  for (std::size_t ch = 0; ch < f.channels; ++ch) {
    const float* row = f.data.data() + ch * f.pixels;
    double a = 0.0, b = 0.0;
    for (std::size_t p = 0; p < f.pixels; ++p) {
      a += double(mask[p]) * row[p];
      b += (1.0 - double(mask[p])) * row[p];
    }
    fg[ch] = a;
    bg[ch] = b;
  }
  if (normalize) {
    std::vector<double> u;
    kernels::normalize(fg, u);
    fg = u;
    kernels::normalize(bg, u);
    bg = u;
  }
  return {to_tensor(fg), to_tensor(bg)};
}

FgBgVectors fg_bg_vectors(const Tensor& features, std::span<const float> query, const MaskHeadParams& head,
                          bool normalize) {
  return fg_bg_from_mask(features, mask_head(features, query, head), normalize);
}

IntraLoss intra_loss(const ContrastiveBatch& batch) {
  const std::size_t c = batch.key_fg.size();
  require_dim(batch.key_fg, c, "key_fg");
  require_dim(batch.key_bg, c, "key_bg");
  require_dim(batch.ref_fg, c, "ref_fg");
  require_dim(batch.ref_bg, c, "ref_bg");
  std::vector<double> bank;
  bank.reserve(batch.bank_negatives.size() * c);
  for (const Tensor& t : batch.bank_negatives) {
    require_dim(t, c, "bank negative");
    bank.insert(bank.end(), t.data().begin(), t.data().end());
  }
  const auto kf = to_double(batch.key_fg), kb = to_double(batch.key_bg);
  const auto rf = to_double(batch.ref_fg), rb = to_double(batch.ref_bg);
  const auto k = kernels::intra(kf, kb, rf, rb, bank, batch.temperature, true);
  IntraLoss out;
  out.loss = k.loss;
  out.grad_key_fg = to_tensor(k.g_key_fg);
  out.grad_key_bg = to_tensor(k.g_key_bg);
  out.grad_ref_fg = to_tensor(k.g_ref_fg);
  out.grad_ref_bg = to_tensor(k.g_ref_bg);
  for (std::size_t j = 0; j < batch.bank_negatives.size(); ++j) {
    out.grad_bank.push_back(to_tensor(std::span<const double>(k.g_bank).subspan(j * c, c)));
  }
  return out;
}

InterLoss inter_loss(const Tensor& anchor, const std::vector<Tensor>& positives,
                     const std::vector<Tensor>& negatives, double temperature) {
  const std::size_t d = anchor.size();
  require_dim(anchor, d, "anchor");
  auto flatten = [&](const std::vector<Tensor>& ts, const char* what) {
    std::vector<double> flat;
    flat.reserve(ts.size() * d);
    for (const Tensor& t : ts) {
      require_dim(t, d, what);
      flat.insert(flat.end(), t.data().begin(), t.data().end());
    }
    return flat;
  };
  const auto pos = flatten(positives, "positive");
  const auto neg = flatten(negatives, "negative");
  const auto k = kernels::inter(to_double(anchor), pos, neg, temperature);
  InterLoss out;
  out.loss = k.loss;
  out.grad_anchor = to_tensor(k.g_anchor);
  for (std::size_t j = 0; j < positives.size(); ++j) {
    out.grad_positives.push_back(to_tensor(std::span<const double>(k.g_positives).subspan(j * d, d)));
  }
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    out.grad_negatives.push_back(to_tensor(std::span<const double>(k.g_negatives).subspan(j * d, d)));
  }
  return out;
}

// ---------------------------------------------------------------- FrameBank

FrameBank::FrameBank(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), slots_(capacity * dim, 0.0f) {
  if (capacity == 0 || dim == 0) throw ShapeError("frame bank capacity and dim must be positive");
}

void FrameBank::push(const Tensor& v) {
  require_dim(v, dim_, "frame bank entry");
  std::copy(v.data().begin(), v.data().end(), slots_.begin() + cursor_ * dim_);
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void FrameBank::clear() {
  size_ = 0;
  cursor_ = 0;
  std::fill(slots_.begin(), slots_.end(), 0.0f);
}

std::vector<Tensor> FrameBank::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(size_);
  const std::size_t start = (cursor_ + capacity_ - size_) % capacity_;
  for (std::size_t a = 0; a < size_; ++a) {
    const auto* p = slots_.data() + ((start + a) % capacity_) * dim_;
    out.push_back(Tensor::vector(std::vector<float>(p, p + dim_)));
  }
  return out;
}

std::vector<double> FrameBank::flat() const {
  std::vector<double> out;
  out.reserve(size_ * dim_);
  const std::size_t start = (cursor_ + capacity_ - size_) % capacity_;
  for (std::size_t a = 0; a < size_; ++a) {
    const auto* p = slots_.data() + ((start + a) % capacity_) * dim_;
    out.insert(out.end(), p, p + dim_);
  }
  return out;
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what(), 0);
  }
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void FrameBank::save(const std::filesystem::path& stem) const {
  nlohmann::json meta = {{"kind", "frame_bank"}, {"capacity", capacity_}, {"dim", dim_},
                         {"size", size_},        {"cursor", cursor_}};
  write_json(with_suffix(stem, ".json"), meta);
  if (size_ > 0) {
    // Raw slot order so the cursor stays meaningful on reload.
    write_tensor(with_suffix(stem, ".egct"),
                 Tensor({size_, dim_}, std::vector<float>(slots_.begin(), slots_.begin() + size_ * dim_)));
  }
}

FrameBank FrameBank::load(const std::filesystem::path& stem) {
  const auto meta = read_json(with_suffix(stem, ".json"));
  if (meta.value("kind", "") != "frame_bank") throw FormatError("not a frame bank sidecar", 0);
  FrameBank bank(meta.at("capacity").get<std::size_t>(), meta.at("dim").get<std::size_t>());
  bank.size_ = meta.at("size").get<std::size_t>();
  bank.cursor_ = meta.at("cursor").get<std::size_t>();
  if (bank.size_ > bank.capacity_ || bank.cursor_ >= bank.capacity_) throw FormatError("inconsistent bank sidecar", 0);
  if (bank.size_ > 0) {
    const Tensor t = read_tensor(with_suffix(stem, ".egct"));
    if (t.dims() != std::vector<std::size_t>{bank.size_, bank.dim_}) throw FormatError("bank tensor shape mismatch", 0);
    std::copy(t.data().begin(), t.data().end(), bank.slots_.begin());
  }
  return bank;
}

// ---------------------------------------------------------------- VideoBank

VideoBank::VideoBank(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), slots_(capacity * dim, 0.0f), ids_(capacity, 0) {
  if (capacity == 0 || dim == 0) throw ShapeError("video bank capacity and dim must be positive");
}

void VideoBank::push(const Tensor& embedding, std::int64_t video_id) {
  require_dim(embedding, dim_, "video bank entry");
  std::copy(embedding.data().begin(), embedding.data().end(), slots_.begin() + cursor_ * dim_);
  ids_[cursor_] = video_id;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void VideoBank::clear() {
  size_ = 0;
  cursor_ = 0;
  std::fill(slots_.begin(), slots_.end(), 0.0f);
  std::fill(ids_.begin(), ids_.end(), 0);
}

std::size_t VideoBank::slot_of(std::size_t age_index) const {
  return ((cursor_ + capacity_ - size_) % capacity_ + age_index) % capacity_;
}

std::vector<std::pair<Tensor, std::int64_t>> VideoBank::snapshot() const {
  std::vector<std::pair<Tensor, std::int64_t>> out;
  out.reserve(size_);
  for (std::size_t a = 0; a < size_; ++a) {
    const std::size_t s = slot_of(a);
    const auto* p = slots_.data() + s * dim_;
    out.emplace_back(Tensor::vector(std::vector<float>(p, p + dim_)), ids_[s]);
  }
  return out;
}

VideoBankSample VideoBank::sample(std::int64_t current_video_id, std::size_t max_neg) const {
  VideoBankSample out;
  std::vector<std::size_t> neg_slots;
  for (std::size_t a = 0; a < size_; ++a) {
    const std::size_t s = slot_of(a);
    const auto* p = slots_.data() + s * dim_;
    if (ids_[s] == current_video_id) {
      out.positives.push_back(Tensor::vector(std::vector<float>(p, p + dim_)));
    } else {
      neg_slots.push_back(s);
    }
  }
  const std::size_t keep = std::min(max_neg, neg_slots.size());
  for (std::size_t k = neg_slots.size() - keep; k < neg_slots.size(); ++k) {
    const auto* p = slots_.data() + neg_slots[k] * dim_;
    out.negatives.push_back(Tensor::vector(std::vector<float>(p, p + dim_)));
  }
  return out;
}

void VideoBank::save(const std::filesystem::path& stem) const {
  std::vector<std::int64_t> ids(ids_.begin(), ids_.begin() + size_);
  nlohmann::json meta = {{"kind", "video_bank"}, {"capacity", capacity_}, {"dim", dim_},
                         {"size", size_},        {"cursor", cursor_},     {"video_ids", ids}};
  write_json(with_suffix(stem, ".json"), meta);
  if (size_ > 0) {
    write_tensor(with_suffix(stem, ".egct"),
                 Tensor({size_, dim_}, std::vector<float>(slots_.begin(), slots_.begin() + size_ * dim_)));
  }
}

VideoBank VideoBank::load(const std::filesystem::path& stem) {
  const auto meta = read_json(with_suffix(stem, ".json"));
  if (meta.value("kind", "") != "video_bank") throw FormatError("not a video bank sidecar", 0);
  VideoBank bank(meta.at("capacity").get<std::size_t>(), meta.at("dim").get<std::size_t>());
  bank.size_ = meta.at("size").get<std::size_t>();
  bank.cursor_ = meta.at("cursor").get<std::size_t>();
  const auto ids = meta.at("video_ids").get<std::vector<std::int64_t>>();
  if (bank.size_ > bank.capacity_ || bank.cursor_ >= bank.capacity_ || ids.size() != bank.size_) {
    throw FormatError("inconsistent bank sidecar", 0);
  }
  std::copy(ids.begin(), ids.end(), bank.ids_.begin());
  if (bank.size_ > 0) {
    const Tensor t = read_tensor(with_suffix(stem, ".egct"));
    if (t.dims() != std::vector<std::size_t>{bank.size_, bank.dim_}) throw FormatError("bank tensor shape mismatch", 0);
    std::copy(t.data().begin(), t.data().end(), bank.slots_.begin());
  }
  return bank;
}

}  // namespace fixsal
