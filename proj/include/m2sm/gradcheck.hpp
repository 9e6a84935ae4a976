#pragma once

// Central finite differences against the tape gradients of the text CE path.
// The stochastic frame-selection loss is not part of the checked objective.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "m2sm/losses.hpp"
#include "m2sm/model.hpp"
#include "m2sm/rng.hpp"

namespace m2sm {

struct BlockError {
  std::string name;
  std::size_t elements = 0;
  double max_rel = 0.0;
  double max_abs = 0.0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;

  double max_rel() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.max_rel);
    return m;
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.max_abs);
    return m;
  }
};

struct GradCheckOptions {
  double step = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // vanishing gradients from turning rounding noise into large ratios.
  double floor = 1e-6;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double ce_objective(const Model& model, const Sample& sample, const LabelSet& labels) {
  Tape t;
  return ce_loss(t, model.forward(t, sample, false).sentence_probs, labels).scalar();
}

inline GradCheckReport gradient_check(Model& model, const Sample& sample, const LabelSet& labels,
                                      const GradCheckOptions& opt = {}) {
  model.params().zero_grad();
  {
    Tape t;
    const Var loss = ce_loss(t, model.forward(t, sample, false).sentence_probs, labels);
    t.backward(loss);
  }
  GradCheckReport report;
  for (const auto& name : model.params().names()) {
    Param& p = model.params().at(name);
    BlockError be{name, static_cast<std::size_t>(p.size()), 0.0, 0.0};
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + opt.step;
      const double up = ce_objective(model, sample, labels);
      p.value.data()[i] = orig - opt.step;
      const double down = ce_objective(model, sample, labels);
      p.value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double analytic = p.grad.data()[i];
      be.max_abs = std::max(be.max_abs, std::abs(analytic - numeric));
      be.max_rel = std::max(be.max_rel, relative_error(analytic, numeric, opt.floor));
    }
    report.blocks.push_back(be);
  }
  return report;
}

/// A random sample small enough for exhaustive finite differences.
inline Sample tiny_sample(int vocab, int feature_dim, int sentences, int frames, int transcript, std::uint64_t seed) {
  Rng rng(seed);
  Sample s;
  s.id = "tiny";
  for (int i = 0; i < sentences; ++i) {
    const int len = 1 + static_cast<int>(rng.index(4));
    TokenIds ids;
    Tokens toks;
    for (int k = 0; k < len; ++k) {
      ids.push_back(1 + static_cast<TokenId>(rng.index(static_cast<std::size_t>(vocab - 1))));
      toks.push_back("t" + std::to_string(ids.back()));
    }
    s.document.sentences.push_back(ids);
    s.document.sentence_tokens.push_back(toks);
    s.document.raw_sentences.push_back("");
  }
  for (int k = 0; k < transcript; ++k) {
    s.transcript.tokens.push_back(1 + static_cast<TokenId>(rng.index(static_cast<std::size_t>(vocab - 1))));
    s.transcript.token_strings.push_back("t" + std::to_string(s.transcript.tokens.back()));
  }
  s.video.frames.resize(frames, feature_dim);
  for (Eigen::Index i = 0; i < s.video.frames.size(); ++i) s.video.frames.data()[i] = static_cast<float>(rng.normal());
  return s;
}

/// Tiny-dimension check for one attention/fusion configuration.
inline GradCheckReport gradient_check(ModelConfig cfg, std::uint64_t seed, const GradCheckOptions& opt = {}) {
  cfg.vocab_size = std::max(cfg.vocab_size, 6);
  const Sample sample = tiny_sample(cfg.vocab_size, cfg.feature_dim, 3, 3, 3, Rng::derive(seed, 1));
  LabelSet labels{{1, 0, 1}};
  Model model(cfg, seed);
  return gradient_check(model, sample, labels, opt);
}

inline ModelConfig tiny_model_config(AttentionMode attention, FusionMode fusion) {
  ModelConfig c;
  c.vocab_size = 8;
  c.embed_dim = 3;
  c.hidden = 2;
  c.attn_dim = 3;
  c.fusion_hidden = 3;
  c.feature_dim = 3;
  c.attention = attention;
  c.fusion = fusion;
  c.init_scale = 0.5;
  return c;
}

}  // namespace m2sm
