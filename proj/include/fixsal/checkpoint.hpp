#pragma once

#include <filesystem>
#include <optional>

#include "fixsal/trainer.hpp"

namespace fixsal {

struct Checkpoint {
  ModelParams params;
  std::optional<Banks> banks;
};

/// Writes checkpoint.json plus one .egct per tensor (parameters and AdamW
/// moments) and the bank snapshots when present.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params, const Banks* banks = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace fixsal
