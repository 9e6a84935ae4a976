#pragma once

// Checkpoint layout:
//   <dir>/index.json              tensor index + model configuration
//   <dir>/vocab.json              vocabulary words in id order
//   <dir>/<section>/<name>.bin    one tensor per file, binary feature format
// Sections are encoders, attention, fusion. Values are stored as float32.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "m2sm/errors.hpp"
#include "m2sm/features.hpp"
#include "m2sm/model.hpp"
#include "m2sm/text.hpp"

namespace m2sm {

inline std::pair<std::string, std::string> split_param_name(const std::string& name) {
  const auto slash = name.find('/');
  if (slash == std::string::npos) throw CheckpointError("parameter name without section: " + name);
  return {name.substr(0, slash), name.substr(slash + 1)};
}

inline void save_checkpoint(const fs::path& dir, const Model& model, const Vocabulary& vocab) {
  fs::create_directories(dir);
  nlohmann::json index = {{"model_config", to_json(model.config())}, {"tensors", nlohmann::json::array()}};
  for (const auto& name : model.params().names()) {
    const auto& p = model.params().at(name);
    const auto [section, leaf] = split_param_name(name);
    fs::create_directories(dir / section);
    const fs::path rel = fs::path(section) / (leaf + ".bin");
    write_feature_file(dir / rel, p.value.cast<float>());
    index["tensors"].push_back(
        {{"name", name}, {"section", section}, {"file", rel.generic_string()}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  std::ofstream(dir / "index.json", std::ios::binary | std::ios::trunc) << index.dump(2) << '\n';
  std::ofstream(dir / "vocab.json", std::ios::binary | std::ios::trunc) << nlohmann::json(vocab.words()).dump() << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

struct LoadedCheckpoint {
  Model model;
  Vocabulary vocab;
};

/// Rebuilds the model from the stored configuration and fills every tensor.
/// Any missing, extra, or misshapen tensor is a CheckpointError.
inline LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  const auto index = read_json(dir / "index.json");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(index.at("model_config"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad model_config: ") + e.what());
  }
  LoadedCheckpoint out{Model(cfg, 0), Vocabulary::from_words(read_json(dir / "vocab.json").get<std::vector<std::string>>())};
  if (out.vocab.size() != static_cast<std::size_t>(cfg.vocab_size)) {
    throw CheckpointError("vocabulary has " + std::to_string(out.vocab.size()) + " words, model expects " +
                          std::to_string(cfg.vocab_size));
  }
  std::size_t seen = 0;
  for (const auto& t : index.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    if (!out.model.params().contains(name)) throw CheckpointError("unexpected tensor " + name);
    auto& p = out.model.params().at(name);
    FeatureMatrix m;
    try {
      m = read_feature_file(dir / t.at("file").get<std::string>());
    } catch (const Error& e) {
      throw CheckpointError(std::string("tensor ") + name + ": " + e.what());
    }
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw CheckpointError("tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(p.value.rows()) + "x" +
                            std::to_string(p.value.cols()));
    }
    p.value = m.cast<double>();
    ++seen;
  }
  if (seen != out.model.params().names().size()) throw CheckpointError("checkpoint is missing tensors");
  return out;
}

}  // namespace m2sm
