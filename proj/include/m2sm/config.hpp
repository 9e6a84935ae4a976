#pragma once

#include <json.hpp>

#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "m2sm/attention.hpp"
#include "m2sm/errors.hpp"
#include "m2sm/fusion.hpp"
#include "m2sm/model.hpp"
#include "m2sm/synth.hpp"
#include "m2sm/training.hpp"

namespace m2sm {

/// Every knob of a run. Field names double as config-file keys.
struct RunConfig {
  std::string manifest;
  std::string output_dir = "run";
  std::string checkpoint;

  int embed_dim = 32;
  int hidden = 64;
  int attn_dim = 64;
  int fusion_hidden = 32;
  std::optional<int> feature_dim;  // inferred from the data when unset

  std::string attention = "bihop";
  std::string fusion = "late_plus";
  std::string pairing = "cross";
  std::string reverse_route = "auto";
  bool sum_pool = false;
  double beta = 0.3;
  double alpha_ts = 3.33;
  double alpha_vs = 1.0;
  double lr = 1e-4;
  int epochs = 50;
  int patience = 3;
  std::uint64_t seed = 0;
  double init_scale = 0.08;

  int k_sentences = 3;
  int k_frames = 5;
  int fps_group = 5;
  int min_raw_frames = 1;
  int label_cap = 4;
  std::array<double, 3> split = {0.7, 0.1, 0.2};
  std::string eval_split = "test";

  bool use_frames = true;
  bool use_transcript = true;
  bool use_bistream = true;

  int ablation_epochs = 10;
  bool ablation_sweeps = true;
  int jobs = 0;  // 0: one worker per hardware thread

  void validate() const {
    parse_attention(attention);
    parse_fusion(fusion);
    if (pairing != "cross" && pairing != "self") throw ConfigError("pairing must be cross|self");
    if (reverse_route != "auto" && reverse_route != "direct") throw ConfigError("reverse_route must be auto|direct");
    if (eval_split != "train" && eval_split != "val" && eval_split != "test") {
      throw ConfigError("eval_split must be train|val|test");
    }
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (alpha_ts < 0.0 || alpha_vs < 0.0) throw ConfigError("alpha_ts and alpha_vs must be >= 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (epochs < 0 || ablation_epochs < 0) throw ConfigError("epochs must be >= 0");
    if (fps_group < 1) throw ConfigError("fps_group must be >= 1");
    if (k_sentences < 1 || k_frames < 1) throw ConfigError("k_sentences and k_frames must be >= 1");
    if (embed_dim < 1 || hidden < 1 || attn_dim < 1 || fusion_hidden < 1) {
      throw ConfigError("model dimensions must be positive");
    }
    if (feature_dim && *feature_dim < 1) throw ConfigError("feature_dim must be positive");
  }

  ModelConfig model_config(int vocab_size, int data_feature_dim) const {
    if (feature_dim && *feature_dim != data_feature_dim) {
      throw ConfigError("feature_dim " + std::to_string(*feature_dim) + " does not match data dimension " +
                        std::to_string(data_feature_dim));
    }
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.embed_dim = embed_dim;
    m.hidden = hidden;
    m.attn_dim = attn_dim;
    m.fusion_hidden = fusion_hidden;
    m.feature_dim = data_feature_dim;
    m.attention = parse_attention(attention);
    m.fusion = parse_fusion(fusion);
    m.beta = beta;
    m.pairing = pairing == "self" ? PenaltyPairing::kSelf : PenaltyPairing::kCross;
    m.reverse_route = reverse_route == "direct" ? ReverseRoute::kDirect : ReverseRoute::kAuto;
    m.use_frames = use_frames;
    m.use_transcript = use_transcript;
    m.sum_pool = sum_pool;
    m.init_scale = init_scale;
    return m;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.lr = lr;
    t.alpha_ts = alpha_ts;
    t.alpha_vs = alpha_vs;
    t.use_bistream = use_bistream;
    t.epochs = epochs;
    t.patience = patience;
    t.seed = Rng::derive(seed, 2);
    return t;
  }

  LoadOptions load_options() const { return {fps_group, seed, min_raw_frames}; }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthConfig, samples, sentences, min_words, max_words, frames,
                                                fps_group, feature_dim, vocab_size, salience, noise,
                                                transcript_length, transcript_overlap, ref_images)

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {{"manifest", c.manifest},
                      {"output_dir", c.output_dir},
                      {"checkpoint", c.checkpoint},
                      {"embed_dim", c.embed_dim},
                      {"hidden", c.hidden},
                      {"attn_dim", c.attn_dim},
                      {"fusion_hidden", c.fusion_hidden},
                      {"attention", c.attention},
                      {"fusion", c.fusion},
                      {"pairing", c.pairing},
                      {"reverse_route", c.reverse_route},
                      {"sum_pool", c.sum_pool},
                      {"beta", c.beta},
                      {"alpha_ts", c.alpha_ts},
                      {"alpha_vs", c.alpha_vs},
                      {"lr", c.lr},
                      {"epochs", c.epochs},
                      {"patience", c.patience},
                      {"seed", c.seed},
                      {"init_scale", c.init_scale},
                      {"k_sentences", c.k_sentences},
                      {"k_frames", c.k_frames},
                      {"fps_group", c.fps_group},
                      {"min_raw_frames", c.min_raw_frames},
                      {"label_cap", c.label_cap},
                      {"split", c.split},
                      {"eval_split", c.eval_split},
                      {"use_frames", c.use_frames},
                      {"use_transcript", c.use_transcript},
                      {"use_bistream", c.use_bistream},
                      {"ablation_epochs", c.ablation_epochs},
                      {"ablation_sweeps", c.ablation_sweeps},
                      {"jobs", c.jobs}};
  j["feature_dim"] = c.feature_dim ? nlohmann::json(*c.feature_dim) : nlohmann::json(nullptr);
  return j;
}

/// Overlays keys present in `j` onto `c`; unknown keys are a ConfigError.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  const nlohmann::json known = to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  };
  get("manifest", c.manifest);
  get("output_dir", c.output_dir);
  get("checkpoint", c.checkpoint);
  get("embed_dim", c.embed_dim);
  get("hidden", c.hidden);
  get("attn_dim", c.attn_dim);
  get("fusion_hidden", c.fusion_hidden);
  if (j.contains("feature_dim")) {
    if (j["feature_dim"].is_null()) {
      c.feature_dim.reset();
    } else {
      int v = 0;
      get("feature_dim", v);
      c.feature_dim = v;
    }
  }
  get("attention", c.attention);
  get("fusion", c.fusion);
  get("pairing", c.pairing);
  get("reverse_route", c.reverse_route);
  get("sum_pool", c.sum_pool);
  get("beta", c.beta);
  get("alpha_ts", c.alpha_ts);
  get("alpha_vs", c.alpha_vs);
  get("lr", c.lr);
  get("epochs", c.epochs);
  get("patience", c.patience);
  get("seed", c.seed);
  get("init_scale", c.init_scale);
  get("k_sentences", c.k_sentences);
  get("k_frames", c.k_frames);
  get("fps_group", c.fps_group);
  get("min_raw_frames", c.min_raw_frames);
  get("label_cap", c.label_cap);
  get("split", c.split);
  get("eval_split", c.eval_split);
  get("use_frames", c.use_frames);
  get("use_transcript", c.use_transcript);
  get("use_bistream", c.use_bistream);
  get("ablation_epochs", c.ablation_epochs);
  get("ablation_sweeps", c.ablation_sweeps);
  get("jobs", c.jobs);
}

inline void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  apply_json(c, j);
}

/// M2SM_SEED, when set, replaces the seed from the config file.
inline void apply_seed_env(RunConfig& c) {
  if (const char* v = std::getenv("M2SM_SEED"); v != nullptr && *v != '\0') {
    char* end = nullptr;
    const auto seed = std::strtoull(v, &end, 10);
    if (end == nullptr || *end != '\0') throw ConfigError(std::string("M2SM_SEED is not an integer: ") + v);
    c.seed = seed;
  }
}

}  // namespace m2sm
