#include <doctest.h>

#include <string>

#include "fixsal/config.hpp"
#include "fixsal/errors.hpp"

using namespace fixsal;

namespace {

std::string error_of(const std::string& json) {
  try {
    parse_config(json);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("desk defaults") {
  const RunConfig c = RunConfig::desk();
  CHECK(c.scene.channels == 64);
  CHECK(c.train.iimc.tau == doctest::Approx(0.07));
  CHECK(c.infer.threshold == doctest::Approx(0.1));
  CHECK(c.eval.split == "test");
  const RunConfig empty = parse_config("{}");
  CHECK(config_to_json(empty) == config_to_json(c));
}

TEST_CASE("config overrides") {
  const RunConfig c = parse_config(
      R"({"scene": {"height": 20, "seed": 9}, "train": {"lr": 0.5, "use_pos": false, "lr_drop_iter": -1},
          "iimc": {"tau": 0.2}, "io": {"train_videos": 3}, "eval": {"split": "train"}})");
  CHECK(c.scene.height == 20);
  CHECK(c.scene.seed == 9);
  CHECK(c.train.lr == 0.5);
  CHECK(!c.train.use_pos);
  CHECK(c.train.iimc.tau == 0.2);
  CHECK(c.data.train_videos == 3);
  CHECK(c.eval.split == "train");

  const RunConfig back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("config errors name the key") {
  CHECK(error_of(R"({"scene": {"framez": 3}})").find("scene.framez") != std::string::npos);
  CHECK(error_of(R"({"bogus": {}})").find("bogus") != std::string::npos);
  CHECK(error_of(R"({"train": {"iterations": "many"}})").find("train.iterations") != std::string::npos);
  CHECK(error_of(R"({"train": {"iterations": -4}})").find("train.iterations") != std::string::npos);
  CHECK(error_of(R"({"train": {"use_sem": 1}})").find("train.use_sem") != std::string::npos);
  CHECK(!error_of(R"({"iimc": {"tau": 0}})").empty());
  CHECK(!error_of(R"({"eval": {"split": "dev"}})").empty());
  CHECK(!error_of("{not json").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), MissingInputError);
}
