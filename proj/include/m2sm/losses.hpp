#pragma once

// Text cross-entropy, the diversity/representativeness frame rewards, the
// REINFORCE surrogate for frame selection, and the mixed bi-stream loss.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "m2sm/errors.hpp"
#include "m2sm/labels.hpp"
#include "m2sm/params.hpp"
#include "m2sm/rng.hpp"

namespace m2sm {

inline constexpr double kProbEpsilon = 1e-7;

/// -(1/NS) sum [y log p + (1 - y) log(1 - p)], with p clipped to [eps, 1 - eps].
inline Var ce_loss(Tape& t, const std::vector<Var>& probs, const LabelSet& labels) {
  if (probs.size() != labels.size()) {
    throw LossError("ce_loss: " + std::to_string(probs.size()) + " predictions vs " +
                    std::to_string(labels.size()) + " labels");
  }
  if (probs.empty()) throw LossError("ce_loss: no predictions");
  std::vector<Var> terms;
  terms.reserve(probs.size());
  for (std::size_t n = 0; n < probs.size(); ++n) {
    const Var p = ad::clip(probs[n], kProbEpsilon, 1.0 - kProbEpsilon);
    terms.push_back(labels.y[n] == 1 ? ad::log(p) : ad::log(ad::one_minus(p)));
  }
  return ad::scale(ad::sum_all(terms), -1.0 / static_cast<double>(probs.size()));
}

inline double ce_loss(const std::vector<double>& probs, const LabelSet& labels) {
  Tape t;
  std::vector<Var> p;
  for (double v : probs) p.push_back(t.constant(Mat::Constant(1, 1, v)));
  return ce_loss(t, p, labels).scalar();
}

struct RewardPair {
  double div = 0.0;  // in [0, 2]
  double rep = 0.0;  // in (0, 1]

  double total() const { return div + rep; }
};

inline std::vector<std::size_t> unique_sorted(const std::vector<std::size_t>& selected) {
  std::set<std::size_t> s(selected.begin(), selected.end());
  return {s.begin(), s.end()};
}

/// Mean pairwise (1 - cosine) over ordered pairs of distinct selected frames.
/// `states` holds one frame per row. Fewer than two selections give 0.
inline double reward_div(const Eigen::MatrixXd& states, const std::vector<std::size_t>& selected) {
  const auto sel = unique_sorted(selected);
  if (sel.size() < 2) return 0.0;
  Eigen::MatrixXd unit(static_cast<Eigen::Index>(sel.size()), states.cols());
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const auto row = states.row(static_cast<Eigen::Index>(sel[i]));
    const double n = row.norm();
    unit.row(static_cast<Eigen::Index>(i)) = n > 0.0 ? Eigen::RowVectorXd(row / n) : Eigen::RowVectorXd(row);
  }
  const Eigen::MatrixXd cos = unit * unit.transpose();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < cos.rows(); ++i) {
    for (Eigen::Index j = 0; j < cos.cols(); ++j) {
      if (i != j) acc += 1.0 - cos(i, j);
    }
  }
  const double k = static_cast<double>(sel.size());
  return acc / (k * (k - 1.0));
}

/// exp(-(1/NM) sum_j min_{j' in selected} ||m_j - m_j'||_2)
inline double reward_rep(const Eigen::MatrixXd& states, const std::vector<std::size_t>& selected) {
  const auto sel = unique_sorted(selected);
  if (sel.empty()) throw RewardError("representativeness reward needs at least one selected frame");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < states.rows(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (auto s : sel) best = std::min(best, (states.row(j) - states.row(static_cast<Eigen::Index>(s))).norm());
    acc += best;
  }
  return std::exp(-acc / static_cast<double>(states.rows()));
}

struct VideoLoss {
  Var surrogate;
  RewardPair rewards;
  double baseline = 0.0;  // updated moving average
  std::vector<int> actions;
};

/// One REINFORCE episode over frame-selection probabilities. Actions are
/// Bernoulli draws; an empty draw is resampled once and then replaced by the
/// single most probable frame. surrogate = -(R - baseline) * log pi(actions).
/// A missing baseline is initialised to the first episode's reward.
inline VideoLoss video_loss(const std::vector<Var>& frame_probs, const Eigen::MatrixXd& states, Rng& rng,
                            std::optional<double> baseline, double decay = 0.9) {
  if (frame_probs.empty()) throw RewardError("video_loss: no frames");
  const std::size_t n = frame_probs.size();
  VideoLoss out;
  auto draw = [&] {
    std::vector<int> a(n);
    for (std::size_t j = 0; j < n; ++j) a[j] = rng.bernoulli(frame_probs[j].scalar()) ? 1 : 0;
    return a;
  };
  auto any = [](const std::vector<int>& a) { return std::find(a.begin(), a.end(), 1) != a.end(); };
  out.actions = draw();
  if (!any(out.actions)) out.actions = draw();
  if (!any(out.actions)) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (frame_probs[j].scalar() > frame_probs[best].scalar()) best = j;
    }
    out.actions[best] = 1;
  }

  std::vector<std::size_t> selected;
  for (std::size_t j = 0; j < n; ++j) {
    if (out.actions[j]) selected.push_back(j);
  }
  out.rewards = {reward_div(states, selected), reward_rep(states, selected)};
  const double reward = out.rewards.total();
  const double b = baseline.value_or(reward);

  std::vector<Var> logp;
  logp.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Var p = ad::clip(frame_probs[j], kProbEpsilon, 1.0 - kProbEpsilon);
    logp.push_back(out.actions[j] ? ad::log(p) : ad::log(ad::one_minus(p)));
  }
  out.surrogate = ad::scale(ad::sum_all(logp), -(reward - b));
  out.baseline = decay * b + (1.0 - decay) * reward;
  return out;
}

inline void check_alphas(double alpha_ts, double alpha_vs) {
  if (!(alpha_ts >= 0.0) || !(alpha_vs >= 0.0)) throw ConfigError("alpha_ts and alpha_vs must be >= 0");
  if (alpha_ts == 0.0 && alpha_vs == 0.0) throw ConfigError("alpha_ts and alpha_vs cannot both be zero");
}

/// alpha_ts * ce + alpha_vs * surrogate. The surrogate already carries the
/// negative reward, so minimising this maximises the frame rewards.
inline Var bistream_loss(const Var& ce, const Var& surrogate, double alpha_ts, double alpha_vs) {
  check_alphas(alpha_ts, alpha_vs);
  return ad::add(ad::scale(ce, alpha_ts), ad::scale(surrogate, alpha_vs));
}

inline double bistream_loss(double ce, double surrogate, double alpha_ts, double alpha_vs) {
  check_alphas(alpha_ts, alpha_vs);
  return alpha_ts * ce + alpha_vs * surrogate;
}

}  // namespace m2sm
