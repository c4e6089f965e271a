#pragma once

#include <filesystem>
#include <string>

#include "fixsal/dataset.hpp"
#include "fixsal/infer.hpp"
#include "fixsal/scenegen.hpp"
#include "fixsal/trainer.hpp"

namespace fixsal {

struct EvalConfig {
  std::string split = "test";  // "train" or "test"
  void validate() const;
};

/// Everything a command needs. JSON sections: scene, train, iimc, infer, eval, io.
struct RunConfig {
  SceneConfig scene;
  DatasetConfig data;
  TrainConfig train;
  InferConfig infer;
  EvalConfig eval;

  /// Desk-scale defaults (C = 64) used when no config file is given.
  static RunConfig desk();
  void validate() const;
};

/// Applies `json_text` on top of the desk defaults. Unknown keys and mistyped
/// values raise ConfigError naming the dotted key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

}  // namespace fixsal
