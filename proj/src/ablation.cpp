#include "fixsal/ablation.hpp"

#include <cstdio>

#include "fixsal/errors.hpp"
#include "fixsal/infer.hpp"
#include "fixsal/log.hpp"
#include "fixsal/trainer.hpp"

namespace fixsal {

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v{"full",          "no-intra", "no-inter", "no-frame-bank",
                                          "no-video-bank", "no-pos",   "no-sem"};
  return v;
}

TrainConfig apply_variant(TrainConfig cfg, const std::string& variant) {
  if (variant == "full") {
  } else if (variant == "no-intra") {
    cfg.lambda_intra = 0.0;
  } else if (variant == "no-inter") {
    cfg.lambda_inter = 0.0;
  } else if (variant == "no-frame-bank") {
    cfg.iimc.use_frame_bank = false;
  } else if (variant == "no-video-bank") {
    cfg.iimc.use_video_bank = false;
  } else if (variant == "no-pos") {
    cfg.use_pos = false;
  } else if (variant == "no-sem") {
    cfg.use_sem = false;
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
  return cfg;
}

std::vector<AblationRow> run_ablation(const std::vector<VideoSample>& train, const std::vector<VideoSample>& test,
                                      const RunConfig& cfg, const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds) {
  for (const auto& v : variants) apply_variant(cfg.train, v);
  if (test.empty()) throw ConfigError("ablation needs a non-empty test split");
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    for (std::uint64_t seed : seeds) {
      TrainConfig tc = apply_variant(cfg.train, v);
      tc.seed = seed;
      log_info("ablation: " + v + " seed " + std::to_string(seed));
      const TrainResult result = train_loop(train, tc);
      const EvalReport r = evaluate_videos(test, result.params, cfg.infer);
      rows.push_back({v, seed, r.s_measure, r.f_measure, r.mae});
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = std::string(kAblationHeader) + "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f,%.6f\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.s_measure, r.f_measure, r.mae);
    out += buf;
  }
  return out;
}

}  // namespace fixsal
