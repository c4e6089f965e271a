#include "fixsal/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include "fixsal/ablation.hpp"
#include "fixsal/checkpoint.hpp"
#include "fixsal/config.hpp"
#include "fixsal/dataset.hpp"
#include "fixsal/errors.hpp"
#include "fixsal/gradcheck.hpp"
#include "fixsal/infer.hpp"
#include "fixsal/log.hpp"
#include "fixsal/metrics.hpp"
#include "fixsal/tensor_io.hpp"
#include "fixsal/trainer.hpp"

namespace fixsal {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string oracle = "none";
  std::string variants;
  std::string corrupt;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<double> lambda_intra, lambda_inter, lambda_pce, tau;
  float eps = 1e-3f;
  std::size_t instances = 10;
  std::size_t channels = 16;
  std::size_t size = 8;
  bool quiet = false;
  bool verbose = false;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig::desk() : load_config(o.config);
  if (o.iterations) cfg.train.iterations = *o.iterations;
  if (o.lambda_intra) cfg.train.lambda_intra = *o.lambda_intra;
  if (o.lambda_inter) cfg.train.lambda_inter = *o.lambda_inter;
  if (o.lambda_pce) cfg.train.lambda_pce = *o.lambda_pce;
  if (o.tau) cfg.train.iimc.tau = *o.tau;
  cfg.validate();
  return cfg;
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("--") + what + " is required");
  if (!fs::exists(path)) throw MissingInputError(std::string(what) + " not found: " + path);
}

Dataset load_data(const Options& o) {
  require_dir(o.data, "data");
  return read_dataset(o.data);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

int cmd_gen(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  RunConfig cfg = resolve_config(o);
  if (o.seed) cfg.scene.seed = *o.seed;
  const Dataset data = generate_dataset(cfg.scene, cfg.data);
  write_dataset(data, o.out);
  write_text(fs::path(o.out) / "config.json", config_to_json(cfg));
  out << "wrote " << data.train.size() << " train and " << data.test.size() << " test videos to " << o.out << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  RunConfig cfg = resolve_config(o);
  if (o.seed) cfg.train.seed = *o.seed;
  const Dataset data = load_data(o);
  const TrainResult result = train_loop(data.train, cfg.train, [](const HistoryRow& r) {
    log_info("step " + std::to_string(r.step) + " total " + format_double(r.total) + " mae " +
             format_double(r.train_mae));
  });
  const fs::path dir(o.out);
  save_checkpoint(dir, result.params, &result.banks);
  std::string csv = "step,L_pce,L_intra,L_inter,total\n";
  for (const HistoryRow& r : result.history) {
    csv += std::to_string(r.step) + "," + format_double(r.loss_pce) + "," + format_double(r.loss_intra) + "," +
           format_double(r.loss_inter) + "," + format_double(r.total) + "\n";
  }
  write_text(dir / "history.csv", csv);
  write_text(dir / "config.json", config_to_json(cfg));
  std::size_t skipped = 0;
  for (const auto& s : result.steps) skipped += s.skipped ? 1 : 0;
  out << "trained " << cfg.train.iterations << " iterations (" << skipped << " skipped); checkpoint in " << o.out
      << "\n";
  return kExitOk;
}

const std::vector<VideoSample>& eval_split(const Dataset& data, const RunConfig& cfg) {
  return cfg.eval.split == "train" ? data.train : data.test;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  if (o.oracle != "none" && o.oracle != "perfect" && o.oracle != "inverted") {
    throw ConfigError("--oracle must be none, perfect or inverted");
  }
  const Dataset data = load_data(o);
  const auto& videos = eval_split(data, cfg);
  EvalReport report;
  std::string method = "fixsal";
  if (o.oracle == "none") {
    require_dir(o.checkpoint, "checkpoint");
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    report = evaluate_videos(videos, ckpt.params, cfg.infer);
  } else {
    method = o.oracle + "-oracle";
    for (const VideoSample& v : videos) {
      for (const FrameSample& f : v.frames) {
        Tensor pred = f.gt_mask;
        if (o.oracle == "inverted") {
          for (auto& x : pred.data()) x = 1.0f - x;
        }
        report.add(pred, f.gt_mask);
      }
    }
    report.finalize();
  }
  if (!o.out.empty()) {
    write_text(fs::path(o.out) / "report.json", report.to_json());
    write_text(fs::path(o.out) / "report.csv", report.to_csv(method));
  }
  out << report.to_csv(method);
  return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  const RunConfig cfg = resolve_config(o);
  const Dataset data = load_data(o);
  require_dir(o.checkpoint, "checkpoint");
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  std::size_t frames = 0;
  for (const VideoSample& v : eval_split(data, cfg)) {
    char name[32];
    std::snprintf(name, sizeof(name), "video_%03lld", static_cast<long long>(v.video_id));
    const fs::path dir = fs::path(o.out) / name;
    fs::create_directories(dir);
    const auto preds = infer_video(v, ckpt.params, cfg.infer);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const FramePrediction& p = preds[i];
      char file[32];
      std::snprintf(file, sizeof(file), "mask_%03zu.pgm", i);
      write_pgm(dir / file, p.mask);
      nlohmann::ordered_json row{{"video", v.video_id},
                                 {"frame", i},
                                 {"confidence", p.confidence},
                                 {"matched_index", p.matched_index ? nlohmann::ordered_json(*p.matched_index)
                                                                   : nlohmann::ordered_json(nullptr)},
                                 {"bank_size", p.bank_size},
                                 {"selected_query", p.selected_query}};
      if (p.skipped) row["skipped"] = p.reason;
      log.push_back(row);
      ++frames;
    }
  }
  write_text(fs::path(o.out) / "infer_log.json", log.dump(2) + "\n");
  out << "wrote " << frames << " masks to " << o.out << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  GradcheckOptions g;
  g.seed = o.seed.value_or(0);
  g.eps = o.eps;
  g.instances = o.instances;
  g.channels = o.channels;
  g.height = g.width = o.size;
  g.corrupt = o.corrupt;
  if (!(g.eps >= 1e-4f && g.eps <= 1e-2f)) throw ConfigError("--eps must lie in [1e-4, 1e-2]");
  const auto entries = run_gradcheck(g);
  bool ok = true;
  for (const std::string& loss : gradcheck_losses()) {
    const GradcheckEntry* worst = nullptr;
    for (const auto& e : entries) {
      if (e.loss == loss && (!worst || e.check.worst_error > worst->check.worst_error)) worst = &e;
    }
    out << loss << ": worst relative error " << format_double(worst->check.worst_error) << "\n";
    for (const auto& e : entries) {
      if (e.loss == loss && !e.check.passed) {
        ok = false;
        out << "  FAIL instance " << e.instance << " " << e.tensor << "[" << e.index << "] abs diff "
            << format_double(e.check.worst_abs) << "\n";
      }
    }
  }
  out << (ok ? "gradcheck passed\n" : "gradcheck failed\n");
  return ok ? kExitOk : kExitCheckFailed;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const std::vector<std::string> variants = o.variants.empty() ? ablation_variants() : split_list(o.variants);
  for (const auto& v : variants) apply_variant(cfg.train, v);
  const Dataset data = load_data(o);
  const auto rows = run_ablation(data.train, data.test, cfg, variants, {o.seed.value_or(cfg.train.seed)});
  const std::string csv = ablation_csv(rows);
  if (!o.out.empty()) write_text(o.out, csv);
  out << csv;
  return kExitOk;
}

void add_config_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON run config");
  cmd->add_option("--iterations", o.iterations, "training iterations");
  cmd->add_option("--lambda-intra", o.lambda_intra, "weight of the intra-video loss");
  cmd->add_option("--lambda-inter", o.lambda_inter, "weight of the inter-video loss");
  cmd->add_option("--lambda-pce", o.lambda_pce, "weight of the scribble loss");
  cmd->add_option("--tau", o.tau, "contrastive temperature");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Fixation-guided weakly supervised video saliency on synthetic scenes", "fixsal");
  app.require_subcommand(1);
  app.fallthrough();  // -q/-v also accepted after the subcommand
  Options o;
  app.add_flag("-q,--quiet", o.quiet, "only print errors");
  app.add_flag("-v,--verbose", o.verbose, "print progress");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_config_flags(gen, o);
  gen->add_option("--seed", o.seed, "dataset seed");
  gen->add_option("--out", o.out, "output directory");

  auto* train = app.add_subcommand("train", "train on a generated dataset");
  add_config_flags(train, o);
  train->add_option("--data", o.data, "dataset directory");
  train->add_option("--seed", o.seed, "training seed");
  train->add_option("--out", o.out, "checkpoint directory");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_config_flags(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
  eval->add_option("--data", o.data, "dataset directory");
  eval->add_option("--oracle", o.oracle, "none, perfect or inverted (uses ground truth as prediction)");
  eval->add_option("--out", o.out, "report directory");

  auto* infer = app.add_subcommand("infer", "write per-frame masks and the matching log");
  add_config_flags(infer, o);
  infer->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
  infer->add_option("--data", o.data, "dataset directory");
  infer->add_option("--out", o.out, "output directory");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  grad->add_option("--seed", o.seed, "instance seed");
  grad->add_option("--eps", o.eps, "finite-difference step");
  grad->add_option("--instances", o.instances, "random instances per loss");
  grad->add_option("--channels", o.channels, "feature channels");
  grad->add_option("--size", o.size, "frame height and width");
  grad->add_option("--corrupt", o.corrupt, "perturb this loss's analytic gradient (test hook)");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate the ablation variants");
  add_config_flags(ablate, o);
  ablate->add_option("--data", o.data, "dataset directory");
  ablate->add_option("--seed", o.seed, "training seed");
  ablate->add_option("--variants", o.variants, "comma-separated subset of the variants");
  ablate->add_option("--out", o.out, "CSV output path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const LogLevel previous = log_level();
  set_log_level(o.quiet ? LogLevel::kQuiet : (o.verbose ? LogLevel::kInfo : LogLevel::kWarn));
  int code = kExitOk;
  try {
    if (gen->parsed()) code = cmd_gen(o, out);
    if (train->parsed()) code = cmd_train(o, out);
    if (eval->parsed()) code = cmd_eval(o, out);
    if (infer->parsed()) code = cmd_infer(o, out);
    if (grad->parsed()) code = cmd_gradcheck(o, out);
    if (ablate->parsed()) code = cmd_ablate(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    code = kExitConfig;
  } catch (const MissingInputError& e) {
    err << "missing input: " << e.what() << "\n";
    code = kExitMissingInput;
  } catch (const FormatError& e) {
    err << "bad input: " << e.what() << " (byte " << e.offset() << ")\n";
    code = kExitMissingInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kExitCheckFailed;
  }
  set_log_level(previous);
  return code;
}

}  // namespace fixsal
