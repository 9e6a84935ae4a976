#pragma once

// Synthetic corpus with planted salience. Salient sentences draw their words
// from a reserved pool, salient frames lie along one latent direction shared
// by the whole corpus, and transcripts mostly repeat salient words. The gold
// summary is the raw text of the salient sentences, and the planted masks are
// written next to the data under truth/.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "m2sm/data.hpp"
#include "m2sm/errors.hpp"
#include "m2sm/rng.hpp"

namespace m2sm {

struct SynthConfig {
  int samples = 20;
  int sentences = 10;
  int min_words = 5;
  int max_words = 9;
  int frames = 8;  // after subsampling; raw count is frames * fps_group
  int fps_group = 5;
  int feature_dim = 16;
  int vocab_size = 200;
  double salience = 0.3;
  double noise = 0.1;
  int transcript_length = 12;
  double transcript_overlap = 0.7;  // share of transcript words taken from salient sentences
  int ref_images = 2;

  void validate() const {
    if (!(salience > 0.0 && salience < 1.0)) throw ConfigError("salience must lie in (0, 1)");
    if (samples < 1) throw ConfigError("samples must be >= 1");
    if (sentences < 2) throw ConfigError("sentences must be >= 2");
    if (min_words < 1 || max_words < min_words) throw ConfigError("need 1 <= min_words <= max_words");
    if (frames < 1) throw ConfigError("frames must be >= 1");
    if (fps_group < 1) throw ConfigError("fps_group must be >= 1");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (vocab_size < 8) throw ConfigError("vocab_size must be >= 8");
    if (noise < 0.0) throw ConfigError("noise must be >= 0");
    if (transcript_length < 0) throw ConfigError("transcript_length must be >= 0");
    if (!(transcript_overlap >= 0.0 && transcript_overlap <= 1.0)) {
      throw ConfigError("transcript_overlap must lie in [0, 1]");
    }
    if (ref_images < 0) throw ConfigError("ref_images must be >= 0");
  }

  int salient_sentences() const { return planted_count(sentences); }
  int salient_frames() const { return planted_count(frames); }

 private:
  int planted_count(int n) const {
    const int k = static_cast<int>(std::lround(salience * n));
    return std::clamp(k, 1, std::max(1, n - 1));
  }
};

struct PlantedTruth {
  std::vector<int> sentences;   // per sentence
  std::vector<int> raw_frames;  // per raw frame
};

inline std::string synth_word(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%04d", id);
  return buf;
}

/// Unit-norm direction every salient frame is built around.
inline Eigen::VectorXd synth_latent_direction(int dim, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x1a7e47));
  Eigen::VectorXd u(dim);
  for (int i = 0; i < dim; ++i) u(i) = rng.normal();
  return u / u.norm();
}

struct SynthSample {
  Sample sample;
  FeatureMatrix raw_frames;
  PlantedTruth truth;
};

inline SynthSample synth_sample(const SynthConfig& cfg, const Eigen::VectorXd& latent, std::uint64_t seed,
                                const std::string& id) {
  Rng rng(seed);
  const int salient_pool = std::max(2, cfg.vocab_size / 4);
  auto salient_word = [&] { return synth_word(static_cast<int>(rng.index(salient_pool))); };
  auto background_word = [&] {
    return synth_word(salient_pool + static_cast<int>(rng.index(cfg.vocab_size - salient_pool)));
  };

  SynthSample out;
  Sample& s = out.sample;
  s.id = id;
  s.document.id = id;

  std::vector<int> order(cfg.sentences);
  for (int i = 0; i < cfg.sentences; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  out.truth.sentences.assign(cfg.sentences, 0);
  for (int i = 0; i < cfg.salient_sentences(); ++i) out.truth.sentences[order[i]] = 1;

  std::vector<std::string> salient_tokens;
  for (int i = 0; i < cfg.sentences; ++i) {
    const int len = cfg.min_words + static_cast<int>(rng.index(cfg.max_words - cfg.min_words + 1));
    Tokens toks;
    for (int k = 0; k < len; ++k) toks.push_back(out.truth.sentences[i] ? salient_word() : background_word());
    std::string raw;
    for (int k = 0; k < len; ++k) {
      std::string w = toks[k];
      if (k == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      raw += (k ? " " : "") + w;
    }
    raw += '.';
    if (out.truth.sentences[i]) {
      s.gold_summary.push_back(raw);
      salient_tokens.insert(salient_tokens.end(), toks.begin(), toks.end());
    }
    s.document.raw_sentences.push_back(raw);
    s.document.sentence_tokens.push_back(std::move(toks));
  }

  for (int k = 0; k < cfg.transcript_length; ++k) {
    const bool from_salient = rng.uniform() < cfg.transcript_overlap;
    s.transcript.token_strings.push_back(from_salient ? salient_tokens[rng.index(salient_tokens.size())]
                                                      : background_word());
  }
  for (std::size_t k = 0; k < s.transcript.token_strings.size(); ++k) {
    s.transcript.raw_text += (k ? " " : "") + s.transcript.token_strings[k];
  }

  std::vector<int> block_order(cfg.frames);
  for (int i = 0; i < cfg.frames; ++i) block_order[i] = i;
  rng.shuffle(block_order.begin(), block_order.end());
  std::vector<int> salient_block(cfg.frames, 0);
  for (int i = 0; i < cfg.salient_frames(); ++i) salient_block[block_order[i]] = 1;

  const int raw_count = cfg.frames * cfg.fps_group;
  const double noise_scale = cfg.noise / std::sqrt(static_cast<double>(cfg.feature_dim));
  out.raw_frames.resize(raw_count, cfg.feature_dim);
  out.truth.raw_frames.assign(raw_count, 0);
  for (int b = 0; b < cfg.frames; ++b) {
    Eigen::VectorXd background(cfg.feature_dim);
    for (int d = 0; d < cfg.feature_dim; ++d) background(d) = rng.normal();
    background /= background.norm();
    for (int r = 0; r < cfg.fps_group; ++r) {
      const int f = b * cfg.fps_group + r;
      out.truth.raw_frames[f] = salient_block[b];
      const Eigen::VectorXd& base = salient_block[b] ? latent : background;
      for (int d = 0; d < cfg.feature_dim; ++d) {
        out.raw_frames(f, d) = static_cast<float>(base(d) + noise_scale * rng.normal());
      }
    }
  }

  if (cfg.ref_images > 0) {
    FeatureMatrix ref(cfg.ref_images, cfg.feature_dim);
    for (int i = 0; i < cfg.ref_images; ++i) {
      for (int d = 0; d < cfg.feature_dim; ++d) {
        ref(i, d) = static_cast<float>(latent(d) + noise_scale * rng.normal());
      }
    }
    s.ref_image_features = std::move(ref);
  }
  s.video.frames = out.raw_frames;
  s.video.fps_group = cfg.fps_group;
  return out;
}

inline nlohmann::json truth_to_json(const PlantedTruth& t) {
  return {{"sentences", t.sentences}, {"raw_frames", t.raw_frames}};
}

inline PlantedTruth load_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open truth file: " + path.string());
  nlohmann::json j;
  in >> j;
  return {j.at("sentences").get<std::vector<int>>(), j.at("raw_frames").get<std::vector<int>>()};
}

inline fs::path truth_path(const DatasetManifest& m, const std::string& id) {
  return m.root / "truth" / (id + ".json");
}

/// Writes the corpus, its planted truth, and a split manifest under `dir`.
inline DatasetManifest synth_generate(const SynthConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  cfg.validate();
  for (const char* sub : {"docs", "features", "transcripts", "summaries", "refs", "truth"}) {
    fs::create_directories(dir / sub);
  }
  const Eigen::VectorXd latent = synth_latent_direction(cfg.feature_dim, seed);

  DatasetManifest manifest;
  manifest.root = dir;
  for (int i = 0; i < cfg.samples; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%04d", i);
    const std::string id = buf;
    SynthSample ss = synth_sample(cfg, latent, Rng::derive(seed, static_cast<std::uint64_t>(i) + 1), id);

    ManifestEntry e;
    e.id = id;
    e.document = fs::path("docs") / (id + ".txt");
    e.features = fs::path("features") / (id + ".bin");
    e.transcript = fs::path("transcripts") / (id + ".txt");
    e.summary = fs::path("summaries") / (id + ".txt");
    write_lines(dir / e.document, ss.sample.document.raw_sentences);
    write_feature_file(dir / e.features, ss.raw_frames);
    write_lines(dir / e.transcript, {ss.sample.transcript.raw_text});
    write_lines(dir / e.summary, ss.sample.gold_summary);
    if (ss.sample.ref_image_features) {
      e.ref_features = fs::path("refs") / (id + ".bin");
      write_feature_file(dir / *e.ref_features, *ss.sample.ref_image_features);
    }
    std::ofstream(dir / "truth" / (id + ".json"), std::ios::binary | std::ios::trunc)
        << truth_to_json(ss.truth).dump() << '\n';
    manifest.entries.push_back(std::move(e));
  }
  if (cfg.samples >= 3) manifest = split_dataset(manifest, {0.7, 0.1, 0.2}, seed);
  write_manifest(dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace m2sm
