#include "fixsal/config.hpp"

#include <functional>
#include <map>

#include <json.hpp>

#include "fixsal/errors.hpp"
#include "fixsal/tensor_io.hpp"

namespace fixsal {

using nlohmann::ordered_json;

void EvalConfig::validate() const {
  if (split != "train" && split != "test") throw ConfigError("eval.split: must be \"train\" or \"test\"");
}

RunConfig RunConfig::desk() {
  RunConfig cfg;
  cfg.scene.channels = 64;
  return cfg;
}

void RunConfig::validate() const {
  scene.validate();
  data.validate();
  train.validate();
  infer.validate();
  eval.validate();
}

namespace {

// Binds dotted keys to config fields for both reading and writing.
class Binder {
 public:
  using Reader = std::function<void(const ordered_json&, const std::string&)>;
  using Writer = std::function<ordered_json()>;

  void size(const std::string& key, std::size_t& ref) {
    add(key, [&ref](const ordered_json& j, const std::string& k) {
      if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        throw ConfigError(k + ": expected a non-negative integer");
      }
      ref = j.get<std::size_t>();
    }, [&ref] { return ordered_json(ref); });
  }
  void u64(const std::string& key, std::uint64_t& ref) {
    add(key, [&ref](const ordered_json& j, const std::string& k) {
      if (!j.is_number_unsigned()) throw ConfigError(k + ": expected a non-negative integer");
      ref = j.get<std::uint64_t>();
    }, [&ref] { return ordered_json(ref); });
  }
  void i64(const std::string& key, std::int64_t& ref) {
    add(key, [&ref](const ordered_json& j, const std::string& k) {
      if (!j.is_number_integer()) throw ConfigError(k + ": expected an integer");
      ref = j.get<std::int64_t>();
    }, [&ref] { return ordered_json(ref); });
  }
  void real(const std::string& key, double& ref) {
    add(key, [&ref](const ordered_json& j, const std::string& k) {
      if (!j.is_number()) throw ConfigError(k + ": expected a number");
      ref = j.get<double>();
    }, [&ref] { return ordered_json(ref); });
  }
  void flag(const std::string& key, bool& ref) {
    add(key, [&ref](const ordered_json& j, const std::string& k) {
      if (!j.is_boolean()) throw ConfigError(k + ": expected true or false");
      ref = j.get<bool>();
    }, [&ref] { return ordered_json(ref); });
  }
  void text(const std::string& key, std::string& ref) {
    add(key, [&ref](const ordered_json& j, const std::string& k) {
      if (!j.is_string()) throw ConfigError(k + ": expected a string");
      ref = j.get<std::string>();
    }, [&ref] { return ordered_json(ref); });
  }

  void read(const ordered_json& doc) const {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& [section, body] : doc.items()) {
      if (!sections_.count(section)) throw ConfigError("unknown config key '" + section + "'");
      if (!body.is_object()) throw ConfigError(section + ": expected an object");
      for (const auto& [name, value] : body.items()) {
        const std::string key = section + "." + name;
        const auto it = readers_.find(key);
        if (it == readers_.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(value, key);
      }
    }
  }

  ordered_json write() const {
    ordered_json out = ordered_json::object();
    for (const auto& [key, writer] : order_) {
      const auto dot = key.find('.');
      out[key.substr(0, dot)][key.substr(dot + 1)] = writer();
    }
    return out;
  }

 private:
  void add(const std::string& key, Reader r, Writer w) {
    sections_[key.substr(0, key.find('.'))] = true;
    readers_[key] = std::move(r);
    order_.emplace_back(key, std::move(w));
  }
  std::map<std::string, bool> sections_;
  std::map<std::string, Reader> readers_;
  std::vector<std::pair<std::string, Writer>> order_;
};

Binder bind(RunConfig& c) {
  Binder b;
  SceneConfig& s = c.scene;
  b.size("scene.height", s.height);
  b.size("scene.width", s.width);
  b.size("scene.channels", s.channels);
  b.size("scene.frames_per_video", s.frames_per_video);
  b.size("scene.num_objects", s.num_objects);
  b.real("scene.object_speed", s.object_speed);
  b.real("scene.object_min_size", s.object_min_size);
  b.real("scene.object_max_size", s.object_max_size);
  b.real("scene.feature_separation", s.feature_separation);
  b.real("scene.feature_offset", s.feature_offset);
  b.real("scene.fixation_sigma", s.fixation_sigma);
  b.size("scene.fixation_lock_frames", s.fixation_lock_frames);
  b.real("scene.noise_std", s.noise_std);
  b.u64("scene.seed", s.seed);
  b.u64("scene.world_seed", s.world_seed);

  TrainConfig& t = c.train;
  b.real("train.lr", t.lr);
  b.real("train.weight_decay", t.weight_decay);
  b.size("train.iterations", t.iterations);
  b.i64("train.lr_drop_iter", t.lr_drop_iter);
  b.real("train.lambda_intra", t.lambda_intra);
  b.real("train.lambda_inter", t.lambda_inter);
  b.real("train.lambda_pce", t.lambda_pce);
  b.size("train.ref_window", t.ref_window);
  b.u64("train.seed", t.seed);
  b.size("train.n_queries", t.n_queries);
  b.size("train.embed_dim", t.embed_dim);
  b.size("train.proj_dim", t.proj_dim);
  b.size("train.log_every", t.log_every);
  b.flag("train.use_pos", t.use_pos);
  b.flag("train.use_sem", t.use_sem);

  IimcConfig& m = c.train.iimc;
  b.real("iimc.tau", m.tau);
  b.size("iimc.frame_bank_capacity", m.frame_bank_capacity);
  b.size("iimc.video_bank_capacity", m.video_bank_capacity);
  b.size("iimc.max_neg", m.max_neg);
  b.flag("iimc.normalize", m.normalize);
  b.flag("iimc.use_frame_bank", m.use_frame_bank);
  b.flag("iimc.use_video_bank", m.use_video_bank);

  b.real("infer.threshold", c.infer.threshold);
  b.size("infer.max_bank", c.infer.max_bank);

  b.text("eval.split", c.eval.split);

  b.size("io.train_videos", c.data.train_videos);
  b.size("io.test_videos", c.data.test_videos);
  return b;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg = RunConfig::desk();
  bind(cfg).read(doc);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  return bind(copy).write().dump(2) + "\n";
}

}  // namespace fixsal
