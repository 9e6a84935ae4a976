#include <gtest/gtest.h>

#include <json.hpp>

#include <set>

#include "m2sm/m2sm.hpp"
#include "test_util.hpp"

namespace {

using namespace m2sm;
using testutil::TempDir;

FeatureMatrix ramp(int rows, int cols) {
  FeatureMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = static_cast<float>(i * 100 + j);
  return m;
}

// Writes a small well-formed corpus of `n` samples and returns its manifest path.
fs::path write_corpus(const fs::path& dir, int n) {
  nlohmann::json samples = nlohmann::json::array();
  fs::create_directories(dir / "f");
  for (int i = 0; i < n; ++i) {
    const std::string id = "doc" + std::to_string(i);
    testutil::spit(dir / "a" / (id + ".txt"), "The cat sat.\nA dog ran home.\n");
    testutil::spit(dir / "t" / (id + ".txt"), "cat and dog\n");
    testutil::spit(dir / "s" / (id + ".txt"), "The cat sat.\n");
    write_feature_file(dir / "f" / (id + ".bin"), ramp(10, 4));
    samples.push_back({{"id", id},
                       {"document", "a/" + id + ".txt"},
                       {"features", "f/" + id + ".bin"},
                       {"transcript", "t/" + id + ".txt"},
                       {"summary", "s/" + id + ".txt"}});
  }
  testutil::spit(dir / "manifest.json", nlohmann::json{{"samples", samples}}.dump());
  return dir / "manifest.json";
}

TEST(Text, TokenizeLowercasesAndStripsEdgePunctuation) {
  EXPECT_EQ(tokenize("The cat, sat."), (Tokens{"the", "cat", "sat"}));
  EXPECT_EQ(tokenize("  \"Hello\"\tworld!  "), (Tokens{"hello", "world"}));
  EXPECT_EQ(tokenize("don't -- stop"), (Tokens{"don't", "stop"}));
  EXPECT_EQ(tokenize("a\xC2\xA0" "b"), (Tokens{"a", "b"}));
  EXPECT_TRUE(tokenize(" ... ").empty());
}

TEST(Text, VocabularyIsSortedWithUnknownAtZero) {
  const auto v = Vocabulary::build({"zeta", "alpha", "mid"});
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.words()[0], "<unk>");
  EXPECT_EQ(v.id("alpha"), 1);
  EXPECT_EQ(v.id("zeta"), 3);
  EXPECT_EQ(v.id("missing"), Vocabulary::kUnknown);
  EXPECT_EQ(Vocabulary::from_words(v.words()).id("mid"), 2);
}

TEST(Features, RoundTrip4x2048) {
  TempDir tmp;
  FeatureMatrix m = ramp(4, 2048);
  write_feature_file(tmp / "x.bin", m);
  const auto back = read_feature_file(tmp / "x.bin");
  ASSERT_EQ(back.rows(), 4);
  ASSERT_EQ(back.cols(), 2048);
  EXPECT_TRUE(back == m);
}

TEST(Features, SingleValue) {
  FeatureMatrix m(1, 1);
  m(0, 0) = 0.5f;
  const auto back = decode_features(encode_features(m), "mem");
  ASSERT_EQ(back.rows(), 1);
  EXPECT_EQ(back(0, 0), 0.5f);
}

TEST(Features, LittleEndianHeader) {
  FeatureMatrix m(2, 3);
  m.setZero();
  const auto b = encode_features(m);
  ASSERT_EQ(b.size(), 16u + 24u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "M2SMFEAT");
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(b[12], 3);
}

TEST(Features, TruncatedPayloadIsFormatError) {
  auto b = encode_features(ramp(4, 2048));
  b.resize(b.size() - 4);
  EXPECT_THROW(decode_features(b, "mem"), FormatError);
}

TEST(Features, BadMagicIsFormatError) {
  auto b = encode_features(ramp(1, 1));
  b[0] = 'X';
  EXPECT_THROW(decode_features(b, "mem"), FormatError);
}

TEST(Features, MissingFileIsIngestionError) {
  EXPECT_THROW(read_feature_file("/nonexistent/f.bin"), IngestionError);
}

TEST(Manifest, LoadsThreeEntries) {
  TempDir tmp;
  const auto m = load_manifest(write_corpus(tmp.path(), 3));
  EXPECT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[1].id, "doc1");
}

TEST(Manifest, MissingFeatureFileNamesPath) {
  TempDir tmp;
  const auto path = write_corpus(tmp.path(), 3);
  fs::remove(tmp / "f/doc2.bin");
  try {
    load_manifest(path);
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("doc2.bin"), std::string::npos);
  }
}

TEST(Manifest, DuplicateIdIsSchemaError) {
  nlohmann::json e = {{"id", "x"}, {"document", "d"}, {"features", "f"}, {"transcript", "t"}, {"summary", "s"}};
  EXPECT_THROW(parse_manifest({{"samples", {e, e}}}, "."), SchemaError);
}

TEST(Manifest, JsonRoundTripKeepsSplit) {
  TempDir tmp;
  const auto m = split_dataset(load_manifest(write_corpus(tmp.path(), 5)), {0.6, 0.2, 0.2}, 3);
  write_manifest(tmp / "m2.json", m);
  const auto back = load_manifest(tmp / "m2.json");
  EXPECT_EQ(back.split, m.split);
}

TEST(Subsample, TenFramesGroupFiveKeepsOnePerBlock) {
  VideoFeatures v{ramp(10, 3), 5};
  const auto out = subsample_frames(v, 42);
  ASSERT_EQ(out.count(), 2);
  const float first = out.frames(0, 0) / 100.0f;
  const float second = out.frames(1, 0) / 100.0f;
  EXPECT_GE(first, 0.0f);
  EXPECT_LT(first, 5.0f);
  EXPECT_GE(second, 5.0f);
  EXPECT_LT(second, 10.0f);
}

TEST(Subsample, GroupOneIsIdentity) {
  VideoFeatures v{ramp(7, 3), 1};
  EXPECT_TRUE(subsample_frames(v, 1).frames == v.frames);
}

TEST(Subsample, ShortLastBlockAndDeterminism) {
  VideoFeatures v{ramp(12, 2), 5};
  const auto a = subsample_frames(v, 9);
  const auto b = subsample_frames(v, 9);
  ASSERT_EQ(a.count(), 3);
  EXPECT_TRUE(a.frames == b.frames);
  EXPECT_GE(a.frames(2, 0), 1000.0f);
}

DatasetManifest ids_only(int n) {
  DatasetManifest m;
  for (int i = 0; i < n; ++i) m.entries.push_back({"id" + std::to_string(i), "", "", "", "", std::nullopt});
  return m;
}

TEST(Split, TenSamplesGives712) {
  const auto m = split_dataset(ids_only(10), {0.7, 0.1, 0.2}, 5);
  EXPECT_EQ(m.ids(Split::kTrain).size(), 7u);
  EXPECT_EQ(m.ids(Split::kVal).size(), 1u);
  EXPECT_EQ(m.ids(Split::kTest).size(), 2u);
}

TEST(Split, ThreeSamplesGives111) {
  const auto m = split_dataset(ids_only(3), {0.7, 0.1, 0.2}, 5);
  EXPECT_EQ(m.ids(Split::kTrain).size(), 1u);
  EXPECT_EQ(m.ids(Split::kVal).size(), 1u);
  EXPECT_EQ(m.ids(Split::kTest).size(), 1u);
}

TEST(Split, SameSeedSameSplitAndPartitionIsComplete) {
  const auto a = split_dataset(ids_only(20), {0.7, 0.1, 0.2}, 11);
  const auto b = split_dataset(ids_only(20), {0.7, 0.1, 0.2}, 11);
  EXPECT_EQ(a.split, b.split);
  EXPECT_EQ(a.split.size(), 20u);
  const auto c = split_dataset(ids_only(20), {0.7, 0.1, 0.2}, 12);
  EXPECT_NE(a.split, c.split);
}

TEST(Split, TooFewSamplesIsSplitError) {
  EXPECT_THROW(split_dataset(ids_only(2), {0.7, 0.1, 0.2}, 0), SplitError);
  EXPECT_THROW(split_dataset(ids_only(5), {0.7, 0.2, 0.2}, 0), ConfigError);
}

TEST(Ingest, LoadSampleReadsAllParts) {
  TempDir tmp;
  const auto m = load_manifest(write_corpus(tmp.path(), 3));
  const auto s = load_sample(m, m.entries[0], {5, 0, 1});
  EXPECT_EQ(s.document.size(), 2u);
  EXPECT_EQ(s.document.sentence_tokens[1], (Tokens{"a", "dog", "ran", "home"}));
  EXPECT_EQ(s.video.count(), 2);
  EXPECT_EQ(s.transcript.token_strings, (Tokens{"cat", "and", "dog"}));
  EXPECT_EQ(s.gold_summary, std::vector<std::string>{"The cat sat."});
  EXPECT_FALSE(s.ref_image_features.has_value());
}

TEST(Ingest, ShortVideoIsFiltered) {
  TempDir tmp;
  const auto m = load_manifest(write_corpus(tmp.path(), 3));
  EXPECT_THROW(load_sample(m, m.entries[0], {5, 0, 11}), IngestionError);
}

TEST(Ingest, NonFiniteFeaturesAreRejected) {
  TempDir tmp;
  const auto path = write_corpus(tmp.path(), 3);
  FeatureMatrix bad = ramp(10, 4);
  bad(3, 1) = std::numeric_limits<float>::quiet_NaN();
  write_feature_file(tmp / "f/doc1.bin", bad);
  const auto m = load_manifest(path);
  EXPECT_THROW(load_sample(m, m.entries[1], {}), SchemaError);
}

TEST(Ingest, VocabularyAndEncoding) {
  TempDir tmp;
  const auto m = load_manifest(write_corpus(tmp.path(), 3));
  auto samples = load_samples(m, {"doc0"}, {});
  const auto vocab = build_vocabulary(samples);
  encode_sample(samples[0], vocab);
  EXPECT_EQ(samples[0].document.sentences[0][1], vocab.id("cat"));
  EXPECT_EQ(samples[0].transcript.tokens[1], vocab.id("and"));
}

TEST(Synth, PlantsThreeSalientSentencesOfTen) {
  SynthConfig cfg;
  const auto latent = synth_latent_direction(cfg.feature_dim, 1);
  for (int i = 0; i < cfg.samples; ++i) {
    const auto s = synth_sample(cfg, latent, Rng::derive(1, i), "x");
    EXPECT_EQ(std::count(s.truth.sentences.begin(), s.truth.sentences.end(), 1), 3);
    EXPECT_EQ(s.sample.document.size(), 10u);
    EXPECT_EQ(s.raw_frames.rows(), cfg.frames * cfg.fps_group);
  }
}

TEST(Synth, ZeroNoiseSalientFramesEqualLatent) {
  SynthConfig cfg;
  cfg.noise = 0.0;
  const auto latent = synth_latent_direction(cfg.feature_dim, 4);
  const auto s = synth_sample(cfg, latent, 77, "x");
  const Eigen::RowVectorXf expected = latent.cast<float>().transpose();
  int salient = 0;
  for (int f = 0; f < s.raw_frames.rows(); ++f) {
    if (s.truth.raw_frames[f] == 1) {
      ++salient;
      EXPECT_TRUE(s.raw_frames.row(f) == expected);
    } else {
      EXPECT_FALSE(s.raw_frames.row(f) == expected);
    }
  }
  EXPECT_EQ(salient, cfg.salient_frames() * cfg.fps_group);
}

TEST(Synth, SalienceOutsideOpenIntervalIsConfigError) {
  SynthConfig cfg;
  cfg.salience = 1.5;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("salience"), std::string::npos);
  }
  cfg.salience = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Synth, GreedyLabelsRecoverPlantedMask) {
  SynthConfig cfg;
  const auto latent = synth_latent_direction(cfg.feature_dim, 2);
  for (int i = 0; i < cfg.samples; ++i) {
    const auto s = synth_sample(cfg, latent, Rng::derive(2, i), "x");
    const auto labels = greedy_labels(s.sample.document, s.sample.gold_summary, 4);
    EXPECT_EQ(labels.y, s.truth.sentences) << "sample " << i;
  }
}

TEST(Synth, GeneratedCorpusLoadsAndIsByteStable) {
  TempDir tmp;
  SynthConfig cfg;
  cfg.samples = 5;
  const auto m = synth_generate(cfg, 7, tmp / "a");
  synth_generate(cfg, 7, tmp / "b");
  EXPECT_EQ(testutil::slurp(tmp / "a/manifest.json"), testutil::slurp(tmp / "b/manifest.json"));
  EXPECT_EQ(testutil::slurp(tmp / "a/features/s0003.bin"), testutil::slurp(tmp / "b/features/s0003.bin"));
  EXPECT_EQ(testutil::slurp(tmp / "a/docs/s0001.txt"), testutil::slurp(tmp / "b/docs/s0001.txt"));
  const auto loaded = load_manifest(tmp / "a/manifest.json");
  const auto s = load_sample(loaded, loaded.entries[0], {cfg.fps_group, 0, 1});
  EXPECT_EQ(s.video.count(), cfg.frames);
  EXPECT_EQ(s.video.dim(), cfg.feature_dim);
  ASSERT_TRUE(s.ref_image_features.has_value());
  EXPECT_EQ(load_truth(truth_path(loaded, "s0000")).sentences.size(), 10u);
}

}  // namespace
