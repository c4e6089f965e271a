#include "fixsal/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fixsal/errors.hpp"
#include "fixsal/iimc.hpp"
#include "fixsal/pse.hpp"
#include "fixsal/scenegen.hpp"
#include "fixsal/trainer.hpp"

namespace fixsal {

namespace {

// Several named tensors packed into one flat vector for the finite differences.
struct Packed {
  std::vector<std::string> names;
  std::vector<std::size_t> offsets;  // names.size() + 1 entries
  Tensor flat;

  explicit Packed(const std::vector<std::pair<std::string, const Tensor*>>& parts) {
    std::vector<float> data;
    offsets.push_back(0);
    for (const auto& [name, t] : parts) {
      names.push_back(name);
      data.insert(data.end(), t->data().begin(), t->data().end());
      offsets.push_back(data.size());
    }
    flat = Tensor::vector(std::move(data));
  }
  std::span<const float> part(const Tensor& x, std::size_t k) const {
    return x.data().subspan(offsets[k], offsets[k + 1] - offsets[k]);
  }
  std::pair<std::string, std::size_t> locate(std::size_t i) const {
    std::size_t k = 0;
    while (offsets[k + 1] <= i) ++k;
    return {names[k], i - offsets[k]};
  }
};

std::vector<double> as_double(std::span<const float> v) { return {v.begin(), v.end()}; }

Tensor random_tensor(std::vector<std::size_t> dims, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, stddev);
  Tensor t(std::move(dims));
  for (auto& v : t.data()) v = static_cast<float>(g(rng));
  return t;
}

Tensor from_double(const std::vector<double>& v) {
  Tensor t({v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

GradcheckEntry finish(const std::string& loss, std::size_t instance, const Packed& packed, Tensor analytic,
                      const ScalarFn& f, const GradcheckOptions& opts) {
  if (opts.corrupt == loss) {
    const std::size_t i = analytic.size() / 2;
    analytic[i] = analytic[i] * 1.05f + 1e-3f;
  }
  const Tensor numeric = finite_diff_grad(f, packed.flat, opts.eps);
  GradcheckEntry e;
  e.loss = loss;
  e.instance = instance;
  e.check = compare_gradients(analytic, numeric);
  std::tie(e.tensor, e.index) = packed.locate(e.check.worst_index);
  return e;
}

// Temperature for the synthetic contrastive instances; large enough that the
// central differences stay accurate at eps = 1e-2.
constexpr double kCheckTau = 0.5;

GradcheckEntry check_intra(std::mt19937_64& rng, std::size_t instance, const GradcheckOptions& o) {
  const std::size_t c = o.channels, nb = 6;
  const double sd = 1.0 / std::sqrt(double(c));
  const Tensor kf = random_tensor({c}, sd, rng), kb = random_tensor({c}, sd, rng);
  const Tensor rf = random_tensor({c}, sd, rng), rb = random_tensor({c}, sd, rng);
  const Tensor bank = random_tensor({nb, c}, sd, rng);
  const Packed packed({{"key_fg", &kf}, {"key_bg", &kb}, {"ref_fg", &rf}, {"ref_bg", &rb}, {"bank", &bank}});
  auto eval = [&packed](const Tensor& x, bool grads) {
    return kernels::intra(as_double(packed.part(x, 0)), as_double(packed.part(x, 1)), as_double(packed.part(x, 2)),
                          as_double(packed.part(x, 3)), as_double(packed.part(x, 4)), kCheckTau, grads);
  };
  const auto out = eval(packed.flat, true);
  std::vector<double> g = out.g_key_fg;
  for (const auto* part : {&out.g_key_bg, &out.g_ref_fg, &out.g_ref_bg, &out.g_bank}) {
    g.insert(g.end(), part->begin(), part->end());
  }
  return finish("intra", instance, packed, from_double(g), [&](const Tensor& x) { return eval(x, false).loss; }, o);
}

GradcheckEntry check_inter(std::mt19937_64& rng, std::size_t instance, const GradcheckOptions& o) {
  const std::size_t c = o.channels;
  const double sd = 1.0 / std::sqrt(double(c));
  const Tensor anchor = random_tensor({c}, sd, rng);
  const Tensor pos = random_tensor({3, c}, sd, rng);
  const Tensor neg = random_tensor({5, c}, sd, rng);
  const Packed packed({{"anchor", &anchor}, {"positives", &pos}, {"negatives", &neg}});
  auto eval = [&packed](const Tensor& x) {
    return kernels::inter(as_double(packed.part(x, 0)), as_double(packed.part(x, 1)), as_double(packed.part(x, 2)),
                          kCheckTau);
  };
  const auto out = eval(packed.flat);
  std::vector<double> g = out.g_anchor;
  g.insert(g.end(), out.g_positives.begin(), out.g_positives.end());
  g.insert(g.end(), out.g_negatives.begin(), out.g_negatives.end());
  return finish("inter", instance, packed, from_double(g), [&](const Tensor& x) { return eval(x).loss; }, o);
}

GradcheckEntry check_pce(std::mt19937_64& rng, std::size_t instance, const GradcheckOptions& o) {
  const std::size_t h = o.height, w = o.width;
  const Tensor logits = random_tensor({h, w}, 2.0, rng);
  Tensor fg({h, w}), bg({h, w});
  std::uniform_int_distribution<int> pick(0, 3);
  for (std::size_t p = 0; p < h * w; ++p) {
    const int k = pick(rng);
    if (k == 0) fg[p] = 1.0f;
    if (k == 1) bg[p] = 1.0f;
  }
  fg[0] = 1.0f;
  bg[0] = 0.0f;
  const Packed packed({{"logits", &logits}});
  const PartialCe out = partial_ce_loss(logits, fg, bg);
  return finish("pce", instance, packed, out.grad.reshaped({h * w}),
                [&](const Tensor& x) { return partial_ce_loss(x.reshaped({h, w}), fg, bg).loss; }, o);
}

GradcheckEntry check_full(std::mt19937_64& rng, std::size_t instance, const GradcheckOptions& o) {
  SceneConfig sc;
  sc.height = o.height;
  sc.width = o.width;
  sc.channels = o.channels;
  sc.frames_per_video = 2;
  sc.object_min_size = 5;
  sc.object_max_size = std::min(o.height, o.width) - 2.0;
  sc.object_min_size = std::min(sc.object_min_size, sc.object_max_size);
  sc.feature_separation = 2.0;
  sc.feature_offset = 1.0;
  sc.seed = rng();
  sc.world_seed = rng();
  const VideoSample video = generate_scene(sc, 1);

  TrainConfig tc;
  tc.n_queries = 4;
  tc.embed_dim = 8;
  tc.proj_dim = 8;
  tc.seed = rng();
  tc.iimc.tau = kCheckTau;
  ModelParams params = init_params(o.channels, tc);
  Banks banks = make_banks(tc, o.channels);
  const double sd = 1.0 / std::sqrt(double(o.channels));
  for (int i = 0; i < 5; ++i) banks.frame.push(l2_normalize(random_tensor({o.channels}, sd, rng)));
  for (int i = 0; i < 6; ++i) banks.video.push(l2_normalize(random_tensor({tc.embed_dim}, 0.35, rng)), i % 3);

  const StepInputs in{&video.frames[0], &video.frames[1], 1};
  std::uniform_int_distribution<std::size_t> q(0, tc.n_queries - 1);
  const std::pair<std::size_t, std::size_t> sel{q(rng), q(rng)};

  const Packed packed(
      {{"e_sem", &params.e_sem}, {"mask_head", &params.mask_head.projection}, {"projector", &params.projector.weight}});
  auto unpack = [&packed](const Tensor& x, ModelParams p) {
    for (std::size_t k = 0; k < 3; ++k) {
      Tensor& dst = k == 0 ? p.e_sem : (k == 1 ? p.mask_head.projection : p.projector.weight);
      const auto src = packed.part(x, k);
      std::copy(src.begin(), src.end(), dst.data().begin());
    }
    return p;
  };
  const StepEvaluation ev = evaluate_step(params, in, banks, tc, sel, true);
  std::vector<float> g(ev.grads.e_sem.data().begin(), ev.grads.e_sem.data().end());
  g.insert(g.end(), ev.grads.mask_head.data().begin(), ev.grads.mask_head.data().end());
  g.insert(g.end(), ev.grads.projector.data().begin(), ev.grads.projector.data().end());
  return finish("full", instance, packed, Tensor::vector(std::move(g)),
                [&](const Tensor& x) {
                  return evaluate_step(unpack(x, params), in, banks, tc, sel, false).report.total;
                },
                o);
}

}  // namespace

std::vector<GradcheckEntry> run_gradcheck(const GradcheckOptions& opts) {
  if (opts.channels == 0 || opts.height < 6 || opts.width < 6) {
    throw ConfigError("gradcheck: needs channels >= 1 and frames of at least 6 x 6");
  }
  if (!opts.corrupt.empty() && std::find(gradcheck_losses().begin(), gradcheck_losses().end(), opts.corrupt) ==
                                   gradcheck_losses().end()) {
    throw ConfigError("gradcheck: unknown loss '" + opts.corrupt + "'");
  }
  std::vector<GradcheckEntry> out;
  for (std::size_t i = 0; i < opts.instances; ++i) {
    std::mt19937_64 rng(derive_seed(opts.seed, i));
    out.push_back(check_intra(rng, i, opts));
    out.push_back(check_inter(rng, i, opts));
    out.push_back(check_pce(rng, i, opts));
    out.push_back(check_full(rng, i, opts));
  }
  return out;
}

}  // namespace fixsal
