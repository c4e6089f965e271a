#include "fixsal/checkpoint.hpp"

#include <json.hpp>

#include "fixsal/errors.hpp"
#include "fixsal/tensor_io.hpp"

namespace fixsal {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {


template <class Params>
auto& tensor_of(Params& p, const std::string& name) {
  if (name == "e_sem") return p.e_sem;
  if (name == "mask_head") return p.mask_head.projection;
  if (name == "projector") return p.projector.weight;
  if (name == "query_offsets") return p.query_offsets;
  if (name == "m_e_sem") return p.m_e_sem;
  if (name == "v_e_sem") return p.v_e_sem;
  if (name == "m_mask_head") return p.m_mask_head;
  if (name == "v_mask_head") return p.v_mask_head;
  if (name == "m_projector") return p.m_projector;
  if (name == "v_projector") return p.v_projector;
  throw FormatError("unknown checkpoint tensor '" + name + "'", 0);
}

constexpr const char* kTensorNames[] = {"e_sem",     "mask_head",   "projector",   "query_offsets", "m_e_sem",
                                        "v_e_sem",   "m_mask_head", "v_mask_head", "m_projector",   "v_projector"};

}  // namespace

void save_checkpoint(const fs::path& dir, const ModelParams& params, const Banks* banks) {
  fs::create_directories(dir);
  ordered_json tensors = ordered_json::array();
  for (const char* name : kTensorNames) {
    write_tensor(dir / (std::string(name) + ".egct"), tensor_of(params, name));
    tensors.push_back(name);
  }
  ordered_json m;
  m["format"] = "fixsal-checkpoint";
  m["version"] = 1;
  m["use_pos"] = params.use_pos;
  m["use_sem"] = params.use_sem;
  m["adam_steps"] = params.adam_steps;
  m["tensors"] = tensors;
  m["banks"] = banks != nullptr;
  if (banks) {
    banks->frame.save(dir / "frame_bank");
    banks->video.save(dir / "video_bank");
  }
  const std::string text = m.dump(2) + "\n";
  write_file_bytes(dir / "checkpoint.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path manifest = dir / "checkpoint.json";
  const auto bytes = read_file_bytes(manifest);
  Checkpoint out;
  try {
    const ordered_json m = ordered_json::parse(bytes.begin(), bytes.end());
    if (m.at("format") != "fixsal-checkpoint") throw FormatError(manifest.string() + ": not a checkpoint", 0);
    out.params.use_pos = m.at("use_pos");
    out.params.use_sem = m.at("use_sem");
    out.params.adam_steps = m.at("adam_steps");
    for (const auto& name : m.at("tensors")) {
      const std::string n = name.get<std::string>();
      tensor_of(out.params, n) = read_tensor(dir / (n + ".egct"));
    }
    if (m.at("banks").get<bool>()) {
      out.banks = Banks{FrameBank::load(dir / "frame_bank"), VideoBank::load(dir / "video_bank")};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what(), 0);
  }
  const ModelParams& p = out.params;
  if (p.mask_head.projection.rank() != 2 || p.e_sem.size() != p.mask_head.projection.dim(1) ||
      p.query_offsets.rank() != 2 || p.query_offsets.dim(1) != p.e_sem.size()) {
    throw FormatError(manifest.string() + ": inconsistent parameter shapes", 0);
  }
  return out;
}

}  // namespace fixsal
