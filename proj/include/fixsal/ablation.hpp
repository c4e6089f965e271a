#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fixsal/config.hpp"
#include "fixsal/scenegen.hpp"

namespace fixsal {

/// Variant names in table order.
const std::vector<std::string>& ablation_variants();

/// Switches off the component named by `variant` ("full" leaves cfg as is).
TrainConfig apply_variant(TrainConfig cfg, const std::string& variant);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double s_measure = 0.0;
  double f_measure = 0.0;
  double mae = 0.0;
};

/// Trains every (variant, seed) pair on `train` and evaluates on `test`.
std::vector<AblationRow> run_ablation(const std::vector<VideoSample>& train, const std::vector<VideoSample>& test,
                                      const RunConfig& cfg, const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds);

inline constexpr const char* kAblationHeader = "variant,seed,S_alpha,F_beta_adaptive,MAE";
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace fixsal
