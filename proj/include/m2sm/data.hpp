#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "m2sm/errors.hpp"
#include "m2sm/features.hpp"
#include "m2sm/rng.hpp"
#include "m2sm/text.hpp"

namespace m2sm {

namespace fs = std::filesystem;

struct Document {
  std::string id;
  std::vector<std::string> raw_sentences;
  std::vector<Tokens> sentence_tokens;  // tokenized raw_sentences
  std::vector<TokenIds> sentences;      // filled by encode_sample

  std::size_t size() const { return raw_sentences.size(); }
};

struct VideoFeatures {
  FeatureMatrix frames;  // NM x D_v
  int fps_group = 1;

  Eigen::Index count() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

struct Transcript {
  std::string raw_text;
  Tokens token_strings;
  TokenIds tokens;

  bool empty() const { return token_strings.empty(); }
};

struct Sample {
  std::string id;
  Document document;
  VideoFeatures video;
  Transcript transcript;
  std::vector<std::string> gold_summary;
  std::optional<FeatureMatrix> ref_image_features;
};

enum class Split { kTrain, kVal, kTest };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw SchemaError("unknown split value '" + s + "'");
}

struct ManifestEntry {
  std::string id;
  fs::path document;
  fs::path features;
  fs::path transcript;
  fs::path summary;
  std::optional<fs::path> ref_features;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, Split> split;
  fs::path root;  // directory relative paths resolve against

  std::vector<std::string> ids(Split s) const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
      auto it = split.find(e.id);
      if (it != split.end() && it->second == s) out.push_back(e.id);
    }
    return out;
  }

  const ManifestEntry& entry(const std::string& id) const {
    for (const auto& e : entries) {
      if (e.id == id) return e;
    }
    throw SchemaError("manifest has no sample '" + id + "'");
  }

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : root / p; }
};

// ---------------------------------------------------------------------------
// Text files

/// Nonblank lines of a UTF-8 text file, with trailing CR removed.
inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open text file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

inline void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot open for writing: " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

// ---------------------------------------------------------------------------
// Manifest

inline DatasetManifest parse_manifest(const nlohmann::json& j, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  if (!j.is_object() || !j.contains("samples") || !j["samples"].is_array()) {
    throw SchemaError("manifest must be an object with a 'samples' array");
  }
  std::set<std::string> seen;
  for (const auto& s : j["samples"]) {
    ManifestEntry e;
    try {
      e.id = s.at("id").get<std::string>();
      e.document = s.at("document").get<std::string>();
      e.features = s.at("features").get<std::string>();
      e.transcript = s.at("transcript").get<std::string>();
      e.summary = s.at("summary").get<std::string>();
      if (s.contains("ref_features") && !s["ref_features"].is_null()) {
        e.ref_features = fs::path(s["ref_features"].get<std::string>());
      }
    } catch (const nlohmann::json::exception& ex) {
      throw SchemaError(std::string("malformed manifest entry: ") + ex.what());
    }
    if (!seen.insert(e.id).second) throw SchemaError("duplicate sample id '" + e.id + "'");
    m.entries.push_back(std::move(e));
  }
  if (j.contains("split")) {
    for (const auto& [id, v] : j["split"].items()) {
      if (!seen.contains(id)) throw SchemaError("split references unknown id '" + id + "'");
      m.split[id] = parse_split(v.get<std::string>());
    }
  }
  return m;
}

/// Parses and validates a manifest; every referenced file must exist.
inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError("manifest " + path.string() + " is not valid JSON: " + ex.what());
  }
  DatasetManifest m = parse_manifest(j, path.parent_path());
  for (const auto& e : m.entries) {
    std::vector<fs::path> files = {e.document, e.features, e.transcript, e.summary};
    if (e.ref_features) files.push_back(*e.ref_features);
    for (const auto& f : files) {
      if (!fs::exists(m.resolve(f))) {
        throw IngestionError("sample '" + e.id + "' references missing file " + m.resolve(f).string());
      }
    }
  }
  return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json s = {{"id", e.id},
                        {"document", e.document.generic_string()},
                        {"features", e.features.generic_string()},
                        {"transcript", e.transcript.generic_string()},
                        {"summary", e.summary.generic_string()}};
    if (e.ref_features) s["ref_features"] = e.ref_features->generic_string();
    samples.push_back(std::move(s));
  }
  nlohmann::json split = nlohmann::json::object();
  for (const auto& [id, s] : m.split) split[id] = to_string(s);
  return {{"samples", samples}, {"split", split}};
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot open for writing: " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Frame subsampling and splitting

/// Keeps one frame per block of `fps_group` consecutive frames, drawn
/// uniformly within the block. The last block may be short.
inline VideoFeatures subsample_frames(const VideoFeatures& video, std::uint64_t seed) {
  const int g = video.fps_group;
  if (g < 1) throw ConfigError("fps_group must be >= 1");
  const Eigen::Index raw = video.count();
  const Eigen::Index blocks = (raw + g - 1) / g;
  Rng rng(seed);
  VideoFeatures out;
  out.fps_group = 1;
  out.frames.resize(blocks, video.dim());
  for (Eigen::Index k = 0; k < blocks; ++k) {
    const Eigen::Index begin = k * g;
    const Eigen::Index end = std::min<Eigen::Index>(begin + g, raw);
    const auto pick = begin + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(end - begin)));
    out.frames.row(k) = video.frames.row(pick);
  }
  return out;
}

/// Shuffles ids with a seeded RNG and partitions them into train/val/test.
/// Sizes are floor(n * fraction) for val and test, with the remainder going
/// to train; val and test always receive at least one sample.
inline DatasetManifest split_dataset(const DatasetManifest& manifest, std::array<double, 3> fractions,
                                     std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const std::size_t n = manifest.entries.size();
  if (n < 3) throw SplitError("need at least 3 samples to split, got " + std::to_string(n));

  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids.begin(), ids.end());

  auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions[1]));
  auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions[2]));
  n_val = std::max<std::size_t>(n_val, 1);
  n_test = std::max<std::size_t>(n_test, 1);
  const std::size_t n_train = n - n_val - n_test;

  DatasetManifest out = manifest;
  out.split.clear();
  for (std::size_t i = 0; i < n; ++i) {
    out.split[ids[i]] = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample ingestion

struct LoadOptions {
  int fps_group = 5;
  std::uint64_t seed = 0;
  int min_raw_frames = 1;  // corpus filter on video length, in raw frames
};

inline std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline Document make_document(const std::string& id, const std::vector<std::string>& lines) {
  Document d;
  d.id = id;
  for (const auto& l : lines) {
    Tokens t = tokenize(l);
    if (t.empty()) continue;
    d.raw_sentences.push_back(l);
    d.sentence_tokens.push_back(std::move(t));
  }
  return d;
}

inline Transcript make_transcript(const std::vector<std::string>& lines) {
  Transcript t;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) t.raw_text += '\n';
    t.raw_text += lines[i];
    for (auto& tok : tokenize(lines[i])) t.token_strings.push_back(std::move(tok));
  }
  return t;
}

/// Reads one sample's files and subsamples its frames. Token ids are left
/// empty until encode_sample assigns them against a vocabulary.
inline Sample load_sample(const DatasetManifest& m, const ManifestEntry& e, const LoadOptions& opt) {
  Sample s;
  s.id = e.id;
  s.document = make_document(e.id, read_lines(m.resolve(e.document)));
  if (s.document.size() == 0) throw SchemaError("sample '" + e.id + "' has an empty document");
  s.transcript = make_transcript(read_lines(m.resolve(e.transcript)));
  s.gold_summary = read_lines(m.resolve(e.summary));

  VideoFeatures raw;
  raw.frames = read_feature_file(m.resolve(e.features));
  raw.fps_group = opt.fps_group;
  if (raw.count() < opt.min_raw_frames || raw.count() < 1) {
    throw IngestionError("sample '" + e.id + "' video has " + std::to_string(raw.count()) +
                         " frames, below the minimum of " + std::to_string(opt.min_raw_frames));
  }
  if (raw.dim() < 1) throw SchemaError("sample '" + e.id + "' has zero-width frame features");
  if (!raw.frames.allFinite()) throw SchemaError("sample '" + e.id + "' has non-finite frame features");
  s.video = subsample_frames(raw, Rng::derive(opt.seed, id_hash(e.id)));

  if (e.ref_features) {
    FeatureMatrix ref = read_feature_file(m.resolve(*e.ref_features));
    if (ref.cols() != raw.dim()) {
      throw SchemaError("sample '" + e.id + "' reference features have dim " + std::to_string(ref.cols()) +
                        ", frames have " + std::to_string(raw.dim()));
    }
    s.ref_image_features = std::move(ref);
  }
  return s;
}

inline std::vector<Sample> load_samples(const DatasetManifest& m, const std::vector<std::string>& ids,
                                        const LoadOptions& opt) {
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(load_sample(m, m.entry(id), opt));
  return out;
}

/// Vocabulary over every article and transcript token of the given samples.
inline Vocabulary build_vocabulary(const std::vector<Sample>& samples) {
  std::set<std::string> tokens;
  for (const auto& s : samples) {
    for (const auto& sent : s.document.sentence_tokens) tokens.insert(sent.begin(), sent.end());
    tokens.insert(s.transcript.token_strings.begin(), s.transcript.token_strings.end());
  }
  return Vocabulary::build(tokens);
}

inline void encode_sample(Sample& s, const Vocabulary& vocab) {
  s.document.sentences.clear();
  for (const auto& t : s.document.sentence_tokens) s.document.sentences.push_back(vocab.encode(t));
  s.transcript.tokens = vocab.encode(s.transcript.token_strings);
}

}  // namespace m2sm
