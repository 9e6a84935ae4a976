#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "m2sm/m2sm.hpp"
#include "test_util.hpp"

#ifndef M2SM_CLI_PATH
#error "M2SM_CLI_PATH must name the built command-line tool"
#endif

namespace {

using namespace m2sm;
using testutil::slurp;
using testutil::TempDir;

SynthConfig small_synth() {
  SynthConfig s;
  s.samples = 8;
  s.sentences = 5;
  s.frames = 4;
  s.feature_dim = 6;
  s.vocab_size = 40;
  return s;
}

RunConfig small_run(const fs::path& data, const fs::path& out) {
  RunConfig c;
  c.manifest = (data / "manifest.json").string();
  c.output_dir = out.string();
  c.embed_dim = 4;
  c.hidden = 4;
  c.attn_dim = 4;
  c.fusion_hidden = 4;
  c.epochs = 2;
  c.lr = 0.01;
  c.k_frames = 2;
  c.jobs = 1;
  return c;
}

struct CliResult {
  int status;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + M2SM_CLI_PATH + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

TEST(Synth, DefaultConfigWritesTwentySamples) {
  TempDir tmp;
  const auto m = cmd_synth(SynthConfig{}, 0, tmp / "d", false);
  EXPECT_EQ(m.entries.size(), 20u);
  EXPECT_EQ(load_manifest(tmp / "d/manifest.json").ids(Split::kTrain).size(), 14u);
}

TEST(Synth, ExistingOutputNeedsForce) {
  TempDir tmp;
  cmd_synth(small_synth(), 0, tmp / "d", false);
  EXPECT_THROW(cmd_synth(small_synth(), 0, tmp / "d", false), CliError);
  EXPECT_NO_THROW(cmd_synth(small_synth(), 0, tmp / "d", true));
}

TEST(Cli, SynthSameSeedGivesIdenticalBytes) {
  TempDir tmp;
  ASSERT_EQ(run_cli("synth --seed 7 --samples 4 --out " + (tmp / "a").string()).status, 0);
  ASSERT_EQ(run_cli("synth --seed 7 --samples 4 --out " + (tmp / "b").string()).status, 0);
  for (const char* f : {"manifest.json", "features/s0002.bin", "docs/s0001.txt", "transcripts/s0003.txt",
                        "refs/s0000.bin", "truth/s0002.json"}) {
    EXPECT_EQ(slurp(tmp / "a" / f), slurp(tmp / "b" / f)) << f;
  }
}

TEST(Cli, BadSalienceIsConfigErrorNamingTheField) {
  TempDir tmp;
  const auto r = run_cli("synth --salience 1.5 --out " + (tmp / "a").string());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("E_CONFIG"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("salience"), std::string::npos) << r.out;
}

TEST(Cli, ExistingDirectoryWithoutForceFails) {
  TempDir tmp;
  ASSERT_EQ(run_cli("synth --samples 3 --out " + (tmp / "a").string()).status, 0);
  const auto r = run_cli("synth --samples 3 --out " + (tmp / "a").string());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("E_CLI"), std::string::npos) << r.out;
}

TEST(Config, PrecedenceIsFlagThenEnvThenFileThenDefault) {
  TempDir tmp;
  cmd_synth(small_synth(), 0, tmp / "d", false);
  testutil::spit(tmp / "cfg.json",
                 nlohmann::json{{"seed", 5}, {"epochs", 1}, {"hidden", 3}, {"embed_dim", 3}, {"attn_dim", 3},
                                {"fusion_hidden", 3}, {"manifest", (tmp / "d/manifest.json").string()}}
                     .dump());
  auto seed_of = [&](const std::string& extra, const std::string& env) {
    const auto out = tmp / "run";
    fs::remove_all(out);
    const auto r = run_cli("train --config " + (tmp / "cfg.json").string() + " --out " + out.string() + extra, env);
    EXPECT_EQ(r.status, 0) << r.out;
    return nlohmann::json::parse(slurp(out / "config.json"));
  };
  EXPECT_EQ(seed_of("", "")["seed"], 5);
  EXPECT_EQ(seed_of("", "M2SM_SEED=9")["seed"], 9);
  const auto j = seed_of(" --seed 13", "M2SM_SEED=9");
  EXPECT_EQ(j["seed"], 13);
  EXPECT_EQ(j["hidden"], 3);
  EXPECT_EQ(j["k_sentences"], 3);
}

TEST(Config, UnknownFieldIsRejected) {
  RunConfig c;
  EXPECT_THROW(apply_json(c, {{"hiden", 3}}), ConfigError);
  EXPECT_THROW(apply_json(c, {{"hidden", "wide"}}), ConfigError);
  apply_json(c, {{"hidden", 7}, {"feature_dim", nullptr}});
  EXPECT_EQ(c.hidden, 7);
}

TEST(Config, JsonRoundTrip) {
  RunConfig a;
  a.attention = "bilinear";
  a.beta = 0.5;
  a.feature_dim = 16;
  a.split = {0.6, 0.2, 0.2};
  RunConfig b;
  apply_json(b, to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Train, ZeroLearningRateCheckpointEqualsInitialisation) {
  TempDir tmp;
  cmd_synth(small_synth(), 1, tmp / "d", false);
  RunConfig cfg = small_run(tmp / "d", tmp / "run");
  cfg.lr = 0.0;
  const auto out = cmd_train(cfg);
  const auto ckpt = load_checkpoint(out.checkpoint_dir);
  const Model init(ckpt.model.config(), Rng::derive(cfg.seed, 1));
  for (const auto& name : init.params().names()) {
    const Mat stored = ckpt.model.params().at(name).value;
    EXPECT_TRUE(stored == init.params().at(name).value.cast<float>().cast<double>()) << name;
  }
}

TEST(Train, WritesMetricsAndConfigSnapshot) {
  TempDir tmp;
  cmd_synth(small_synth(), 1, tmp / "d", false);
  const auto out = cmd_train(small_run(tmp / "d", tmp / "run"));
  EXPECT_TRUE(fs::exists(tmp / "run/config.json"));
  const auto text = slurp(out.metrics_path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), out.state.epoch);
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  for (const char* key : {"epoch", "train_loss", "val_loss", "R_div", "R_rep", "lr"}) EXPECT_TRUE(first.contains(key));
  EXPECT_TRUE(fs::exists(out.checkpoint_dir / "index.json"));
  EXPECT_TRUE(fs::exists(out.checkpoint_dir / "encoders/embedding.bin"));
  EXPECT_TRUE(fs::exists(out.checkpoint_dir / "attention/text.hop1.W_s.bin"));
  EXPECT_TRUE(fs::exists(out.checkpoint_dir / "fusion/video.F.W1.bin"));
}

TEST(Train, TextOnlyBaselineHasNoVideoParameters) {
  TempDir tmp;
  cmd_synth(small_synth(), 1, tmp / "d", false);
  RunConfig cfg = small_run(tmp / "d", tmp / "run");
  cfg.alpha_vs = 0.0;
  cfg.use_transcript = false;
  cfg.use_frames = false;
  const auto out = cmd_train(cfg);
  const auto ckpt = load_checkpoint(out.checkpoint_dir);
  for (const auto& name : ckpt.model.params().names()) {
    EXPECT_EQ(name.find("frame"), std::string::npos) << name;
    EXPECT_EQ(name.find("attention/"), std::string::npos) << name;
  }
}

TEST(Checkpoint, RoundTripPreservesFloatValues) {
  TempDir tmp;
  Model model(tiny_model_config(AttentionMode::kBiHop, FusionMode::kTensor), 4);
  const auto vocab = Vocabulary::build({"a", "b", "c", "d", "e", "f", "g"});
  save_checkpoint(tmp / "ck", model, vocab);
  const auto back = load_checkpoint(tmp / "ck");
  EXPECT_EQ(back.vocab.words(), vocab.words());
  EXPECT_EQ(to_json(back.model.config()), to_json(model.config()));
  for (const auto& name : model.params().names()) {
    EXPECT_TRUE(back.model.params().at(name).value == model.params().at(name).value.cast<float>().cast<double>());
  }
}

TEST(Checkpoint, ShapeMismatchIsCheckpointError) {
  TempDir tmp;
  Model model(tiny_model_config(AttentionMode::kBilinear, FusionMode::kLate), 4);
  save_checkpoint(tmp / "ck", model, Vocabulary::build({"a", "b", "c", "d", "e", "f", "g"}));
  write_feature_file(tmp / "ck/encoders/embedding.bin", FeatureMatrix::Zero(2, 2));
  EXPECT_THROW(load_checkpoint(tmp / "ck"), CheckpointError);
  fs::remove(tmp / "ck/encoders/embedding.bin");
  EXPECT_THROW(load_checkpoint(tmp / "ck"), CheckpointError);
}

TEST(Eval, CsvAlongsideJsonAndDimensionChecks) {
  TempDir tmp;
  cmd_synth(small_synth(), 2, tmp / "d", false);
  RunConfig cfg = small_run(tmp / "d", tmp / "run");
  cmd_train(cfg);
  const auto out = cmd_eval(cfg, true);
  EXPECT_TRUE(fs::exists(tmp / "run/report.json"));
  EXPECT_TRUE(fs::exists(tmp / "run/report.csv"));
  const auto j = nlohmann::json::parse(slurp(out.report_path));
  EXPECT_EQ(j["per_sample"].size(), load_manifest(tmp / "d/manifest.json").ids(Split::kTest).size());
  EXPECT_TRUE(j["corpus_mean"].contains("cos"));

  RunConfig wrong = cfg;
  wrong.hidden = 5;
  EXPECT_THROW(cmd_eval(wrong), CheckpointError);
}

TEST(Eval, MissingReferenceFeaturesOmitCos) {
  TempDir tmp;
  SynthConfig s = small_synth();
  s.ref_images = 0;
  cmd_synth(s, 2, tmp / "d", false);
  RunConfig cfg = small_run(tmp / "d", tmp / "run");
  cmd_train(cfg);
  const auto out = cmd_eval(cfg);
  EXPECT_FALSE(out.report.corpus_mean.cos.has_value());
  EXPECT_FALSE(out.report.warnings.empty());
}

TEST(Cli, TrainThenEvalUsesTheRunSnapshot) {
  TempDir tmp;
  ASSERT_EQ(run_cli("synth --samples 6 --sentences 4 --frames 3 --feature-dim 5 --out " + (tmp / "d").string()).status, 0);
  const auto train = run_cli("train --manifest " + (tmp / "d/manifest.json").string() +
                             " --hidden 3 --embed-dim 3 --attn-dim 3 --fusion-hidden 3 --epochs 1 --out " +
                             (tmp / "run").string());
  ASSERT_EQ(train.status, 0) << train.out;
  const auto eval = run_cli("eval --format csv --out " + (tmp / "run").string());
  ASSERT_EQ(eval.status, 0) << eval.out;
  EXPECT_NE(eval.out.find("\"r1\""), std::string::npos);
  EXPECT_TRUE(fs::exists(tmp / "run/report.csv"));
}

TEST(Ablate, SmokeMatrixCompletes) {
  TempDir tmp;
  SynthConfig s = small_synth();
  s.samples = 5;
  cmd_synth(s, 3, tmp / "d", false);
  RunConfig cfg = small_run(tmp / "d", tmp / "run");
  cfg.ablation_epochs = 1;
  cfg.ablation_sweeps = false;
  const auto out = cmd_ablate(cfg);
  EXPECT_EQ(out.cells.size(), 48u);
  EXPECT_EQ(out.failures(), 0u);
  const auto j = nlohmann::json::parse(slurp(out.report_path));
  EXPECT_EQ(j["cells"].size(), 48u);
}

TEST(Ablate, CellDefinitions) {
  const auto cells = ablation_cells(true);
  EXPECT_EQ(cells.size(), 48u + 4u + 5u);
  EXPECT_EQ(cells[0].training, "ce");
  EXPECT_EQ(cells[0].alpha_vs, 0.0);
  EXPECT_EQ(cells[2].alpha_ts, 3.33);
}

TEST(Overlap, SyntheticTranscriptsOverlapTheArticle) {
  TempDir tmp;
  cmd_synth(small_synth(), 4, tmp / "d", false);
  const auto rep = cmd_overlap(small_run(tmp / "d", tmp / "run"));
  EXPECT_GT(rep.article.r1, 0.0);
  EXPECT_TRUE(fs::exists(tmp / "run/overlap.json"));
}

TEST(Overlap, NoTranscriptsIsCliError) {
  TempDir tmp;
  SynthConfig s = small_synth();
  s.transcript_length = 0;
  cmd_synth(s, 4, tmp / "d", false);
  EXPECT_THROW(cmd_overlap(small_run(tmp / "d", tmp / "run")), CliError);
}

}  // namespace
