#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fixsal/numerics.hpp"

namespace fixsal {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  float eps = 1e-3f;
  std::size_t channels = 16;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t instances = 1;
  std::string corrupt;  // loss whose analytic gradient gets perturbed (test hook)
};

struct GradcheckEntry {
  std::string loss;     // "intra", "inter", "pce" or "full"
  std::size_t instance = 0;
  std::string tensor;   // name of the worst coordinate's tensor
  std::size_t index = 0;  // flat index inside that tensor
  GradCheck check;
};

inline const std::vector<std::string>& gradcheck_losses() {
  static const std::vector<std::string> names{"intra", "inter", "pce", "full"};
  return names;
}

/// Finite-difference check of every hand-derived gradient on seeded random instances.
std::vector<GradcheckEntry> run_gradcheck(const GradcheckOptions& opts);

}  // namespace fixsal
