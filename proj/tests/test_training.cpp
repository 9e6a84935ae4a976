#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "m2sm/m2sm.hpp"
#include "oracles.hpp"

namespace {

using namespace m2sm;
using Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Labels

TEST(Labels, VerbatimGoldPicksThatSentence) {
  const std::vector<Tokens> doc = {{"a", "b", "c"}, {"d", "e"}, {"the", "cat", "sat"}, {"f", "g", "h"}};
  const auto y = greedy_labels(doc, {{"the", "cat", "sat"}}, 4).y;
  EXPECT_EQ(y, (std::vector<int>{0, 0, 1, 0}));
}

TEST(Labels, DisjointDocumentGetsNoLabels) {
  const std::vector<Tokens> doc = {{"a", "b"}, {"c", "d"}};
  const auto labels = greedy_labels(doc, {{"x", "y"}}, 4);
  EXPECT_EQ(labels.y, (std::vector<int>{0, 0}));
  EXPECT_FALSE(labels.usable());
}

TEST(Labels, EmptyGoldIsLabelError) {
  EXPECT_THROW(greedy_labels(std::vector<Tokens>{{"a"}}, {}, 4), LabelError);
  Document d = make_document("x", {"A b."});
  EXPECT_THROW(greedy_labels(d, {"  ", "..."}, 4), LabelError);
}

TEST(Labels, CapLimitsSelection) {
  const std::vector<Tokens> doc = {{"a"}, {"b"}, {"c"}, {"d"}};
  const auto y = greedy_labels(doc, {{"a", "b", "c", "d"}}, 2).y;
  EXPECT_EQ(std::count(y.begin(), y.end(), 1), 2);
  EXPECT_EQ(y, (std::vector<int>{1, 1, 0, 0}));
}

TEST(Labels, SixSentenceFixtureMatchesExhaustiveSearch) {
  const std::vector<Tokens> doc = {{"police", "said", "the", "man", "was", "arrested"},
                                   {"he", "was", "taken", "to", "hospital"},
                                   {"the", "weather", "was", "fine"},
                                   {"the", "man", "was", "released", "on", "bail"},
                                   {"a", "spokesman", "declined", "to", "comment"},
                                   {"he", "will", "appear", "in", "court", "on", "monday"}};
  const std::vector<Tokens> gold = {{"man", "arrested", "and", "released", "on", "bail"},
                                    {"he", "will", "appear", "in", "court"}};
  const auto labels = greedy_labels(doc, gold, 3);
  std::vector<int> chosen;
  for (int i = 0; i < 6; ++i) {
    if (labels.y[i]) chosen.push_back(i);
  }
  EXPECT_NEAR(oracle::label_score(doc, chosen, gold), oracle::exhaustive_best(doc, gold, 3), 1e-12);
  EXPECT_NEAR(label_score(doc, {chosen.begin(), chosen.end()}, gold), oracle::label_score(doc, chosen, gold), 1e-12);
}

TEST(Labels, GreedyIsNotAlwaysOptimal) {
  // Greedy takes the single best sentence first and cannot undo it; here the
  // two-sentence pair beats every set containing sentence 0.
  const std::vector<Tokens> doc = {{"a", "b", "c", "d"}, {"a", "b", "x"}, {"c", "d", "y"}};
  const std::vector<Tokens> gold = {{"a", "b", "x", "c", "d", "y"}};
  const auto y = greedy_labels(doc, gold, 3).y;
  std::vector<int> chosen;
  for (int i = 0; i < 3; ++i) {
    if (y[i]) chosen.push_back(i);
  }
  EXPECT_LE(oracle::label_score(doc, chosen, gold), oracle::exhaustive_best(doc, gold, 3) + 1e-12);
}

// ---------------------------------------------------------------------------
// Losses

TEST(Losses, ExactPredictionsGiveEpsilonLevelLoss) {
  EXPECT_LT(ce_loss({1.0, 0.0, 1.0}, LabelSet{{1, 0, 1}}), 1e-6);
}

TEST(Losses, HalfEverywhereIsLn2) {
  EXPECT_NEAR(ce_loss({0.5, 0.5, 0.5, 0.5}, LabelSet{{1, 0, 0, 1}}), std::log(2.0), 1e-15);
}

TEST(Losses, HandComputedCrossEntropy) {
  const double expected = -0.5 * (std::log(0.9) + std::log(0.8));
  EXPECT_NEAR(ce_loss({0.9, 0.2}, LabelSet{{1, 0}}), expected, 1e-15);
  EXPECT_NEAR(expected, 0.1643, 1e-4);
}

TEST(Losses, LengthMismatchIsLossError) {
  EXPECT_THROW(ce_loss({0.9, 0.2}, LabelSet{{1}}), LossError);
}

TEST(Losses, CrossEntropyGradientIsClippedNotInfinite) {
  Param p("p", Mat::Constant(1, 1, 0.0));
  Tape t;
  const Var loss = ce_loss(t, {t.param(p)}, LabelSet{{1}});
  t.backward(loss);
  EXPECT_TRUE(std::isfinite(loss.scalar()));
  EXPECT_TRUE(std::isfinite(p.grad(0)));
}

TEST(Rewards, IdenticalFramesHaveNoDiversity) {
  const MatrixXd m = (MatrixXd(2, 3) << 1, 2, 3, 1, 2, 3).finished();
  EXPECT_NEAR(reward_div(m, {0, 1}), 0.0, 1e-15);
}

TEST(Rewards, OrthogonalFramesHaveUnitDiversity) {
  const MatrixXd m = (MatrixXd(2, 2) << 3, 0, 0, -2).finished();
  EXPECT_NEAR(reward_div(m, {0, 1}), 1.0, 1e-15);
}

TEST(Rewards, ThreeFramePairEnumeration) {
  // Frames 0 and 1 coincide in direction, frame 2 is orthogonal to both.
  const MatrixXd m = (MatrixXd(3, 2) << 1, 0, 2, 0, 0, 1).finished();
  EXPECT_NEAR(reward_div(m, {0, 1, 2}), 4.0 / 6.0, 1e-15);
  std::vector<std::vector<double>> rows = {{1, 0}, {2, 0}, {0, 1}};
  EXPECT_NEAR(reward_div(m, {0, 1, 2}), oracle::diversity(rows), 1e-15);
}

TEST(Rewards, FullSelectionIsPerfectlyRepresentative) {
  const MatrixXd m = MatrixXd::Random(5, 4);
  EXPECT_DOUBLE_EQ(reward_rep(m, {0, 1, 2, 3, 4}), 1.0);
}

TEST(Rewards, RepresentativenessByDirectEvaluation) {
  const MatrixXd m = (MatrixXd(3, 2) << 0, 0, 1, 0, 0, 1).finished();
  EXPECT_NEAR(reward_rep(m, {0}), std::exp(-2.0 / 3.0), 1e-15);
  EXPECT_NEAR(std::exp(-2.0 / 3.0), 0.5134, 1e-4);
}

TEST(Rewards, DuplicatesCountOnce) {
  const MatrixXd m = MatrixXd::Random(4, 3);
  EXPECT_EQ(reward_rep(m, {1, 1}), reward_rep(m, {1}));
  EXPECT_EQ(reward_div(m, {0, 2, 2}), reward_div(m, {0, 2}));
}

TEST(Rewards, EmptySelectionIsRewardError) {
  EXPECT_THROW(reward_rep(MatrixXd::Random(3, 2), {}), RewardError);
}

std::vector<Var> prob_vars(Tape& t, std::vector<Param>& ps) {
  std::vector<Var> out;
  for (auto& p : ps) out.push_back(t.param(p));
  return out;
}

TEST(VideoLoss, CertainProbabilitiesSelectEverything) {
  std::vector<Param> ps = {Param("a", Mat::Ones(1, 1)), Param("b", Mat::Ones(1, 1)), Param("c", Mat::Ones(1, 1))};
  Tape t;
  Rng rng(3);
  const auto vl = video_loss(prob_vars(t, ps), MatrixXd::Random(3, 4), rng, std::nullopt);
  EXPECT_EQ(vl.actions, (std::vector<int>{1, 1, 1}));
  EXPECT_DOUBLE_EQ(vl.rewards.rep, 1.0);
}

TEST(VideoLoss, ZeroAdvantageGivesZeroGradient) {
  std::vector<Param> ps = {Param("a", Mat::Constant(1, 1, 0.3)), Param("b", Mat::Constant(1, 1, 0.6))};
  Tape t;
  Rng rng(3);
  // With no baseline the first episode's own reward is used, so R - b = 0.
  const auto vl = video_loss(prob_vars(t, ps), MatrixXd::Random(2, 4), rng, std::nullopt);
  t.backward(vl.surrogate);
  EXPECT_EQ(ps[0].grad(0), 0.0);
  EXPECT_EQ(ps[1].grad(0), 0.0);
  EXPECT_DOUBLE_EQ(vl.baseline, vl.rewards.total());
}

TEST(VideoLoss, SurrogateIsNegatedAdvantageTimesLogPolicy) {
  std::vector<Param> ps = {Param("a", Mat::Constant(1, 1, 0.3)), Param("b", Mat::Constant(1, 1, 0.6))};
  Tape t;
  Rng rng(5);
  const auto vl = video_loss(prob_vars(t, ps), MatrixXd::Random(2, 4), rng, 0.25, 0.9);
  double logp = 0.0;
  for (int j = 0; j < 2; ++j) logp += std::log(vl.actions[j] ? ps[j].value(0) : 1 - ps[j].value(0));
  EXPECT_NEAR(vl.surrogate.scalar(), -(vl.rewards.total() - 0.25) * logp, 1e-14);
  EXPECT_NEAR(vl.baseline, 0.9 * 0.25 + 0.1 * vl.rewards.total(), 1e-15);
}

TEST(VideoLoss, FixedSeedReproducesSelection) {
  std::vector<Param> ps = {Param("a", Mat::Constant(1, 1, 0.5)), Param("b", Mat::Constant(1, 1, 0.5)),
                           Param("c", Mat::Constant(1, 1, 0.5))};
  const MatrixXd states = MatrixXd::Random(3, 2);
  std::vector<std::vector<int>> runs;
  for (int r = 0; r < 2; ++r) {
    Tape t;
    Rng rng(42);
    std::vector<int> all;
    for (int e = 0; e < 10; ++e) {
      const auto a = video_loss(prob_vars(t, ps), states, rng, 0.0).actions;
      all.insert(all.end(), a.begin(), a.end());
    }
    runs.push_back(all);
  }
  EXPECT_EQ(runs[0], runs[1]);
}

TEST(VideoLoss, NeverSelectsNothing) {
  std::vector<Param> ps = {Param("a", Mat::Zero(1, 1)), Param("b", Mat::Constant(1, 1, 1e-9))};
  Tape t;
  Rng rng(1);
  const auto vl = video_loss(prob_vars(t, ps), MatrixXd::Random(2, 2), rng, std::nullopt);
  EXPECT_EQ(vl.actions, (std::vector<int>{0, 1}));
}

TEST(Bistream, WeightedSumArithmetic) {
  EXPECT_NEAR(bistream_loss(0.6, 0.3, 3.33, 1.0), 2.298, 1e-12);
  EXPECT_EQ(bistream_loss(0.6, 0.3, 1.0, 0.0), 0.6);
  EXPECT_THROW(bistream_loss(0.6, 0.3, 0.0, 0.0), ConfigError);
  EXPECT_THROW(bistream_loss(0.6, 0.3, -1.0, 1.0), ConfigError);
}

// ---------------------------------------------------------------------------
// Training loop

TEST(EarlyStopping, WorseningLossStopsAfterFourEvaluations) {
  EarlyStopping s{3};
  int evaluations = 0;
  for (double v : {1.0, 1.1, 1.2, 1.3, 1.4, 1.5}) {
    ++evaluations;
    if (s.observe(v) == EarlyStopping::kStop) break;
  }
  EXPECT_EQ(evaluations, 4);
}

TEST(EarlyStopping, ImprovementResetsTheCounter) {
  EarlyStopping s{2};
  EXPECT_EQ(s.observe(1.0), EarlyStopping::kImproved);
  EXPECT_EQ(s.observe(1.5), EarlyStopping::kWorse);
  EXPECT_EQ(s.observe(0.5), EarlyStopping::kImproved);
  EXPECT_EQ(s.observe(0.5), EarlyStopping::kWorse);
  EXPECT_EQ(s.observe(0.9), EarlyStopping::kStop);
  EXPECT_EQ(s.best, 0.5);
}

TEST(Adagrad, StepMatchesHandUpdate) {
  ParamStore store;
  Rng rng(1);
  Param& p = store.create("x/p", 2, 1, rng, 0.1);
  p.value << 1.0, -2.0;
  p.grad << 0.5, -0.25;
  TrainState st;
  st.lr = 0.1;
  adagrad_step(store, st, 1e-8);
  EXPECT_NEAR(p.value(0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value(1), -2.0 + 0.1 * 0.25 / (0.25 + 1e-8), 1e-15);
  p.grad << 0.5, 0.0;
  adagrad_step(store, st, 1e-8);
  EXPECT_NEAR(st.accumulators.at("x/p")(0), 0.5, 1e-15);
}

struct TinyCorpus {
  std::vector<Sample> samples;
  std::vector<TrainingExample> examples;

  explicit TinyCorpus(int n, std::uint64_t seed) {
    for (int i = 0; i < n; ++i) {
      samples.push_back(tiny_sample(10, 4, 4, 3, 3, Rng::derive(seed, i)));
      samples.back().id = "tiny" + std::to_string(i);
    }
    for (int i = 0; i < n; ++i) examples.push_back({&samples[i], LabelSet{{1, 0, 0, 1}}});
  }
};

ModelConfig small_config() {
  ModelConfig c = tiny_model_config(AttentionMode::kBiHop, FusionMode::kLatePlus);
  c.vocab_size = 10;
  c.feature_dim = 4;
  c.hidden = 4;
  return c;
}

TEST(Training, ZeroLearningRateLeavesParametersBitIdentical) {
  TinyCorpus data(3, 1);
  Model model(small_config(), 7);
  const auto before = snapshot(model.params());
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 3;
  cfg.patience = 10;
  train(model, data.examples, data.examples, cfg);
  for (const auto& [name, v] : before) EXPECT_TRUE(model.params().at(name).value == v) << name;
}

TEST(Training, SingleSampleOverfits) {
  TinyCorpus data(1, 2);
  Model model(small_config(), 3);
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.epochs = 200;
  cfg.patience = 200;
  const auto st = train(model, data.examples, data.examples, cfg);
  EXPECT_LT(mean_ce(model, data.examples), 0.05);
  EXPECT_GT(st.initial_train_ce, 0.5);
}

TEST(Training, TextOnlyAlphaVsZeroSkipsTheVideoBranch) {
  ModelConfig mc = small_config();
  TrainConfig tc;
  tc.alpha_vs = 0.0;
  EXPECT_FALSE(video_branch_active(mc, tc));
  tc.alpha_vs = 1.0;
  EXPECT_TRUE(video_branch_active(mc, tc));
  mc.use_frames = false;
  EXPECT_FALSE(video_branch_active(mc, tc));
}

TEST(Training, EpochLogHasOneRecordPerEpoch) {
  TinyCorpus data(3, 4);
  Model model(small_config(), 5);
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.epochs = 4;
  cfg.patience = 10;
  std::vector<nlohmann::json> rows;
  const auto st = train(model, data.examples, data.examples, cfg, [&](const EpochRecord& r) { rows.push_back(to_json(r)); });
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(st.validations, 4);
  for (const char* key : {"epoch", "train_loss", "val_loss", "R_div", "R_rep", "lr"}) EXPECT_TRUE(rows[0].contains(key));
  EXPECT_GT(rows[3]["R_rep"].get<double>(), 0.0);
}

TEST(Training, NonFiniteLossNamesTheSample) {
  TinyCorpus data(1, 4);
  data.samples[0].video.frames(0, 0) = std::numeric_limits<float>::quiet_NaN();
  Model model(small_config(), 5);
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.epochs = 1;
  try {
    train(model, data.examples, data.examples, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("tiny0"), std::string::npos);
  }
}

TEST(Training, RestoresBestValidationParameters) {
  TinyCorpus data(2, 6);
  Model model(small_config(), 5);
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.epochs = 6;
  cfg.patience = 6;
  const auto st = train(model, data.examples, data.examples, cfg);
  EXPECT_NEAR(mean_ce(model, data.examples), st.best_val, 1e-12);
}

// ---------------------------------------------------------------------------
// Gradient check

TEST(GradCheck, EveryAttentionAndFusionPair) {
  for (auto att : {AttentionMode::kNone, AttentionMode::kConcatProduct, AttentionMode::kBilinear, AttentionMode::kBiHop}) {
    for (auto fus : {FusionMode::kEarly, FusionMode::kTensor, FusionMode::kLate, FusionMode::kLatePlus}) {
      const auto rep = gradient_check(tiny_model_config(att, fus), 11);
      EXPECT_LT(rep.max_rel(), 1e-3) << to_string(att) << " x " << to_string(fus);
    }
  }
}

TEST(GradCheck, TextOnlyAndSelfPairing) {
  auto c = tiny_model_config(AttentionMode::kBiHop, FusionMode::kLatePlus);
  c.pairing = PenaltyPairing::kSelf;
  EXPECT_LT(gradient_check(c, 2).max_rel(), 1e-3);
  c.use_frames = false;
  EXPECT_LT(gradient_check(c, 3).max_rel(), 1e-3);
}

TEST(GradCheck, ZeroParameterModel) {
  auto cfg = tiny_model_config(AttentionMode::kBilinear, FusionMode::kLate);
  Model model(cfg, 1);
  for (const auto& name : model.params().names()) model.params().at(name).value.setZero();
  const Sample sample = tiny_sample(cfg.vocab_size, cfg.feature_dim, 3, 3, 3, 9);
  const auto rep = gradient_check(model, sample, LabelSet{{1, 0, 1}});
  EXPECT_LT(rep.max_abs(), 1e-6);
}

}  // namespace
