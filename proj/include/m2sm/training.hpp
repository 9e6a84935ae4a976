#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "m2sm/data.hpp"
#include "m2sm/errors.hpp"
#include "m2sm/labels.hpp"
#include "m2sm/losses.hpp"
#include "m2sm/model.hpp"

namespace m2sm {

struct TrainConfig {
  double lr = 1e-4;
  double alpha_ts = 3.33;
  double alpha_vs = 1.0;
  bool use_bistream = true;
  int epochs = 50;
  int patience = 3;
  double baseline_decay = 0.9;
  double adagrad_epsilon = 1e-8;
  std::uint64_t seed = 0;
};

/// A sample paired with its extractive labels.
struct TrainingExample {
  const Sample* sample = nullptr;
  LabelSet labels;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_ce = 0.0;
  double val_loss = 0.0;
  double r_div = 0.0;
  double r_rep = 0.0;
  double lr = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"train_ce", r.train_ce}, {"val_loss", r.val_loss},
          {"R_div", r.r_div}, {"R_rep", r.r_rep},           {"lr", r.lr}};
}

/// Everything that evolves during training besides the parameter values.
struct TrainState {
  std::map<std::string, Mat> accumulators;  // per-parameter squared-gradient sums
  double lr = 0.0;
  double alpha_ts = 0.0;
  double alpha_vs = 0.0;
  int epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int patience_counter = 0;
  int validations = 0;
  std::optional<double> baseline;
  std::vector<EpochRecord> log;
  double initial_train_ce = 0.0;
  bool stopped_early = false;
};

/// Per-parameter adaptive step: acc += g^2; p -= lr * g / (sqrt(acc) + eps).
inline void adagrad_step(ParamStore& params, TrainState& st, double epsilon) {
  for (const auto& name : params.names()) {
    Param& p = params.at(name);
    auto [it, fresh] = st.accumulators.try_emplace(name, Mat::Zero(p.value.rows(), p.value.cols()));
    Mat& acc = it->second;
    acc.array() += p.grad.array().square();
    if (st.lr != 0.0) p.value.array() -= st.lr * p.grad.array() / (acc.array().sqrt() + epsilon);
  }
}

inline std::map<std::string, Mat> snapshot(const ParamStore& params) {
  std::map<std::string, Mat> out;
  for (const auto& n : params.names()) out.emplace(n, params.at(n).value);
  return out;
}

inline void restore(ParamStore& params, const std::map<std::string, Mat>& snap) {
  for (const auto& [n, v] : snap) params.at(n).value = v;
}

/// Mean CE over examples with usable labels; NaN when there are none.
inline double mean_ce(const Model& model, const std::vector<TrainingExample>& examples) {
  double acc = 0.0;
  int n = 0;
  for (const auto& ex : examples) {
    if (!ex.labels.usable()) continue;
    Tape t;
    const auto fp = model.forward(t, *ex.sample, false);
    acc += ce_loss(t, fp.sentence_probs, ex.labels).scalar();
    ++n;
  }
  return n > 0 ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

inline bool video_branch_active(const ModelConfig& mc, const TrainConfig& tc) {
  return mc.use_frames && tc.use_bistream && tc.alpha_vs > 0.0;
}

struct StepResult {
  double loss = 0.0;
  std::optional<double> ce;
  std::optional<RewardPair> rewards;
};

/// Forward, backward, and one adaptive update on a single example.
inline StepResult train_step(Model& model, const TrainingExample& ex, const TrainConfig& cfg, TrainState& st,
                             Rng& rng) {
  StepResult r;
  const bool video = video_branch_active(model.config(), cfg);
  const bool text = ex.labels.usable() && cfg.alpha_ts > 0.0;
  if (!video && !text) return r;

  Tape t;
  const auto fp = model.forward(t, *ex.sample, video);
  Var ce = t.constant(Mat::Zero(1, 1));
  Var surrogate = t.constant(Mat::Zero(1, 1));
  if (text) {
    ce = ce_loss(t, fp.sentence_probs, ex.labels);
    r.ce = ce.scalar();
  }
  if (video) {
    const auto vl = video_loss(fp.frame_probs, state_matrix(fp.frame_states), rng, st.baseline, cfg.baseline_decay);
    surrogate = vl.surrogate;
    st.baseline = vl.baseline;
    r.rewards = vl.rewards;
  }
  const Var loss = bistream_loss(ce, surrogate, text ? cfg.alpha_ts : 0.0, video ? cfg.alpha_vs : 0.0);
  r.loss = loss.scalar();
  if (!std::isfinite(r.loss)) {
    throw TrainingError("non-finite loss on sample '" + ex.sample->id + "' (ce=" +
                        (r.ce ? std::to_string(*r.ce) : std::string("n/a")) + ")");
  }
  model.params().zero_grad();
  t.backward(loss);
  for (const auto& name : model.params().names()) {
    if (!model.params().at(name).grad.allFinite()) {
      throw TrainingError("non-finite gradient for " + name + " on sample '" + ex.sample->id + "'");
    }
  }
  adagrad_step(model.params(), st, cfg.adagrad_epsilon);
  return r;
}

/// Patience counter over validation losses. A NaN loss (no usable labels)
/// counts as an improvement only on the first observation.
struct EarlyStopping {
  enum Verdict { kImproved, kWorse, kStop };

  int patience = 3;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  int observed = 0;

  Verdict observe(double val_loss) {
    ++observed;
    const bool improved = std::isnan(val_loss) ? observed == 1 : val_loss < best;
    if (improved) {
      if (!std::isnan(val_loss)) best = val_loss;
      bad_epochs = 0;
      return kImproved;
    }
    return ++bad_epochs >= patience ? kStop : kWorse;
  }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Per-sample updates over shuffled epochs with early stopping on mean
/// validation CE. The model ends up holding the best-validation parameters.
inline TrainState train(Model& model, const std::vector<TrainingExample>& train_set,
                        const std::vector<TrainingExample>& val_set, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {}) {
  if (train_set.empty() || val_set.empty()) throw ConfigError("train and validation splits must be nonempty");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
  if (!(cfg.lr >= 0.0)) throw ConfigError("lr must be >= 0");
  check_alphas(cfg.alpha_ts, video_branch_active(model.config(), cfg) ? cfg.alpha_vs : 0.0);

  TrainState st;
  st.lr = cfg.lr;
  st.alpha_ts = cfg.alpha_ts;
  st.alpha_vs = cfg.alpha_vs;
  st.initial_train_ce = mean_ce(model, train_set);

  Rng rng(cfg.seed);
  EarlyStopping stopper{cfg.patience};
  auto best = snapshot(model.params());
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    st.epoch = epoch;
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0, ce_sum = 0.0, div_sum = 0.0, rep_sum = 0.0;
    int ce_n = 0, reward_n = 0;
    for (std::size_t idx : order) {
      const StepResult r = train_step(model, train_set[idx], cfg, st, rng);
      loss_sum += r.loss;
      if (r.ce) {
        ce_sum += *r.ce;
        ++ce_n;
      }
      if (r.rewards) {
        div_sum += r.rewards->div;
        rep_sum += r.rewards->rep;
        ++reward_n;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_ce = ce_n ? ce_sum / ce_n : 0.0;
    rec.r_div = reward_n ? div_sum / reward_n : 0.0;
    rec.r_rep = reward_n ? rep_sum / reward_n : 0.0;
    rec.lr = st.lr;
    rec.val_loss = mean_ce(model, val_set);
    ++st.validations;
    st.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const auto verdict = stopper.observe(rec.val_loss);
    st.best_val = stopper.best;
    st.patience_counter = stopper.bad_epochs;
    if (verdict == EarlyStopping::kImproved) {
      st.best_epoch = epoch;
      best = snapshot(model.params());
    } else if (verdict == EarlyStopping::kStop) {
      st.stopped_early = true;
      break;
    }
  }
  restore(model.params(), best);
  return st;
}

/// Labels for every sample with a nonempty gold summary.
inline std::vector<TrainingExample> make_examples(const std::vector<Sample>& samples, std::size_t cap = 4) {
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({&s, greedy_labels(s.document, s.gold_summary, cap)});
  return out;
}

}  // namespace m2sm
