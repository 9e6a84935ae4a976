#pragma once

// Combines a unit state (sentence or frame) with its cross-modal context into
// an extraction probability.

#include <functional>
#include <string>

#include "m2sm/errors.hpp"
#include "m2sm/params.hpp"

namespace m2sm {

enum class FusionMode { kEarly, kTensor, kLate, kLatePlus };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kEarly: return "early";
    case FusionMode::kTensor: return "tensor";
    case FusionMode::kLate: return "late";
    case FusionMode::kLatePlus: return "late_plus";
  }
  return "early";
}

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "early") return FusionMode::kEarly;
  if (s == "tensor") return FusionMode::kTensor;
  if (s == "late") return FusionMode::kLate;
  if (s == "late_plus") return FusionMode::kLatePlus;
  throw ConfigError("fusion must be one of early|tensor|late|late_plus, got '" + s + "'");
}

/// Which decision value each late+ penalty weight depends on.
///   kCross (default): W_s = (1 - g)^beta, W_c = (1 - f)^beta, so each
///     modality is damped by the other one's confidence.
///   kSelf: W_s = f^beta, W_c = g^beta, so a modality that is unsure of
///     itself is damped.
enum class PenaltyPairing { kCross, kSelf };

/// Heads for one side (text or video). Unused heads stay null.
struct FusionParams {
  FfnParams unit;     // f: unit state -> (0,1)
  FfnParams context;  // g: context -> (0,1)
  FfnParams head;     // F on (f, g), or the early/tensor joint scorer
};

inline void check_fusion_input(const Var& x, const FfnParams& p, const char* what) {
  if (x.cols() != 1 || x.rows() != p.input_dim()) {
    throw FusionError(std::string(what) + " has dim " + std::to_string(x.rows()) + ", head expects " +
                      std::to_string(p.input_dim()));
  }
}

inline Var fuse_early(Tape& t, const Var& s, const Var& c, const FfnParams& head) {
  const Var x = ad::concat(s, c);
  check_fusion_input(x, head, "early-fusion input");
  return ffn_prob(t, head, x);
}

/// vec([s; 1] (x) [c; 1]), row-major, length (|s|+1)(|c|+1).
inline Var tensor_feature(Tape& t, const Var& s, const Var& c) {
  const Var one = t.constant(Mat::Ones(1, 1));
  return ad::outer_vec(ad::concat(s, one), ad::concat(c, one));
}

inline Var fuse_tensor(Tape& t, const Var& s, const Var& c, const FfnParams& head) {
  const Var x = tensor_feature(t, s, c);
  check_fusion_input(x, head, "tensor-fusion input");
  return ffn_prob(t, head, x);
}

using DecisionHead = std::function<Var(Tape&, const Var&)>;

inline DecisionHead ffn_head(const FfnParams& p) {
  return [p](Tape& t, const Var& pair) { return ffn_prob(t, p, pair); };
}

/// F(f(s), g(c)) with an arbitrary decision head F on the 2-vector.
inline Var fuse_late(Tape& t, const Var& s, const Var& c, const FfnParams& f, const FfnParams& g,
                     const DecisionHead& head) {
  check_fusion_input(s, f, "unit state");
  check_fusion_input(c, g, "context");
  return head(t, ad::concat(ffn_prob(t, f, s), ffn_prob(t, g, c)));
}

inline Var fuse_late(Tape& t, const Var& s, const Var& c, const FusionParams& p) {
  return fuse_late(t, s, c, p.unit, p.context, ffn_head(p.head));
}

struct LatePlusWeights {
  Var w_unit;     // W_s
  Var w_context;  // W_c
};

inline LatePlusWeights late_plus_weights(const Var& f, const Var& g, double beta, PenaltyPairing pairing) {
  if (!(beta >= 0.0)) throw FusionError("beta must be >= 0");
  const double fv = f.scalar();
  const double gv = g.scalar();
  // NaN passes through so the training loop can report the offending sample.
  if (fv < 0.0 || fv > 1.0 || gv < 0.0 || gv > 1.0) {
    throw std::logic_error("late+ decision values must lie in [0, 1]");
  }
  if (pairing == PenaltyPairing::kSelf) return {ad::pow(f, beta), ad::pow(g, beta)};
  return {ad::pow(ad::one_minus(g), beta), ad::pow(ad::one_minus(f), beta)};
}

/// F(W_s f(s), W_c g(c)) with W_s = (1 - g(c))^beta, W_c = (1 - f(s))^beta.
inline Var fuse_late_plus(Tape& t, const Var& s, const Var& c, const FfnParams& f, const FfnParams& g,
                          const DecisionHead& head, double beta, PenaltyPairing pairing = PenaltyPairing::kCross) {
  check_fusion_input(s, f, "unit state");
  check_fusion_input(c, g, "context");
  const Var fv = ffn_prob(t, f, s);
  const Var gv = ffn_prob(t, g, c);
  const auto w = late_plus_weights(fv, gv, beta, pairing);
  return head(t, ad::concat(ad::mul(w.w_unit, fv), ad::mul(w.w_context, gv)));
}

inline Var fuse_late_plus(Tape& t, const Var& s, const Var& c, const FusionParams& p, double beta,
                          PenaltyPairing pairing = PenaltyPairing::kCross) {
  return fuse_late_plus(t, s, c, p.unit, p.context, ffn_head(p.head), beta, pairing);
}

inline Var fuse(Tape& t, FusionMode mode, const Var& s, const Var& c, const FusionParams& p, double beta,
                PenaltyPairing pairing) {
  switch (mode) {
    case FusionMode::kEarly: return fuse_early(t, s, c, p.head);
    case FusionMode::kTensor: return fuse_tensor(t, s, c, p.head);
    case FusionMode::kLate: return fuse_late(t, s, c, p);
    case FusionMode::kLatePlus: return fuse_late_plus(t, s, c, p, beta, pairing);
  }
  throw FusionError("unknown fusion mode");
}

/// Allocates the heads `mode` needs for units of width unit_dim and contexts
/// of width ctx_dim.
inline FusionParams create_fusion_params(ParamStore& store, const std::string& prefix, FusionMode mode,
                                         int unit_dim, int ctx_dim, int hidden, Rng& rng, double scale) {
  FusionParams p;
  switch (mode) {
    case FusionMode::kEarly:
      p.head = FfnParams::create(store, prefix + ".early", unit_dim + ctx_dim, hidden, rng, scale);
      break;
    case FusionMode::kTensor:
      p.head = FfnParams::create(store, prefix + ".tensor", (unit_dim + 1) * (ctx_dim + 1), hidden, rng, scale);
      break;
    case FusionMode::kLate:
    case FusionMode::kLatePlus:
      p.unit = FfnParams::create(store, prefix + ".f", unit_dim, hidden, rng, scale);
      p.context = FfnParams::create(store, prefix + ".g", ctx_dim, hidden, rng, scale);
      p.head = FfnParams::create(store, prefix + ".F", 2, hidden, rng, scale);
      break;
  }
  return p;
}

}  // namespace m2sm
