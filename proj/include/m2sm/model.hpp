#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "m2sm/attention.hpp"
#include "m2sm/data.hpp"
#include "m2sm/encoders.hpp"
#include "m2sm/fusion.hpp"
#include "m2sm/params.hpp"

namespace m2sm {

/// How frames obtain their sentence-side context in bi-hop mode.
enum class ReverseRoute {
  kAuto,    // through the transcript when one is present, else direct
  kDirect,  // always frames over sentences
};

struct ModelConfig {
  int vocab_size = 1;
  int embed_dim = 32;
  int hidden = 64;
  int attn_dim = 64;
  int fusion_hidden = 32;
  int feature_dim = 2048;
  AttentionMode attention = AttentionMode::kBiHop;
  FusionMode fusion = FusionMode::kLatePlus;
  double beta = 0.3;
  PenaltyPairing pairing = PenaltyPairing::kCross;
  ReverseRoute reverse_route = ReverseRoute::kAuto;
  bool use_frames = true;
  bool use_transcript = true;
  bool sum_pool = false;
  double init_scale = 0.08;

  int state_dim() const { return 2 * hidden; }
  bool uses_transcript() const { return use_frames && use_transcript && attention == AttentionMode::kBiHop; }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"embed_dim", c.embed_dim},
          {"hidden", c.hidden},
          {"attn_dim", c.attn_dim},
          {"fusion_hidden", c.fusion_hidden},
          {"feature_dim", c.feature_dim},
          {"attention", to_string(c.attention)},
          {"fusion", to_string(c.fusion)},
          {"beta", c.beta},
          {"pairing", c.pairing == PenaltyPairing::kCross ? "cross" : "self"},
          {"reverse_route", c.reverse_route == ReverseRoute::kAuto ? "auto" : "direct"},
          {"use_frames", c.use_frames},
          {"use_transcript", c.use_transcript},
          {"sum_pool", c.sum_pool},
          {"init_scale", c.init_scale}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.attn_dim = j.at("attn_dim").get<int>();
  c.fusion_hidden = j.at("fusion_hidden").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.attention = parse_attention(j.at("attention").get<std::string>());
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.beta = j.at("beta").get<double>();
  c.pairing = j.at("pairing").get<std::string>() == "self" ? PenaltyPairing::kSelf : PenaltyPairing::kCross;
  c.reverse_route = j.at("reverse_route").get<std::string>() == "direct" ? ReverseRoute::kDirect : ReverseRoute::kAuto;
  c.use_frames = j.at("use_frames").get<bool>();
  c.use_transcript = j.at("use_transcript").get<bool>();
  c.sum_pool = j.at("sum_pool").get<bool>();
  c.init_scale = j.at("init_scale").get<double>();
  return c;
}

struct ForwardPass {
  std::vector<Var> sentence_states;
  std::vector<Var> frame_states;
  std::vector<Var> sentence_probs;  // 1x1 each
  std::vector<Var> frame_probs;     // empty unless the video branch ran
  ContextVars text_context;
  ContextVars video_context;
  bool used_bihop = false;
};

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, std::uint64_t seed) : config_(config) { build(seed); }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const EncoderParams& encoder() const { return enc_; }

  /// Runs the text branch and, when `with_video` is set and frames are in
  /// use, the frame-selection branch.
  ForwardPass forward(Tape& t, const Sample& sample, bool with_video) const {
    ForwardPass out;
    const auto sents = encode_sentences(t, enc_, sample.document.sentences);
    out.sentence_states = sents.states;

    if (!config_.use_frames) {
      for (const Var& s : out.sentence_states) out.sentence_probs.push_back(ffn_prob(t, text_fusion_.unit, s));
      return out;
    }

    const Eigen::MatrixXd frames = sample.video.frames.cast<double>();
    out.frame_states = encode_frames(t, enc_, frames);
    std::vector<Var> transcript;
    if (config_.uses_transcript()) transcript = encode_transcript(t, enc_, sample.transcript.tokens);

    out.text_context = align(t, out.sentence_states, transcript, out.frame_states, text_attn_, false, out.used_bihop);
    for (std::size_t i = 0; i < out.sentence_states.size(); ++i) {
      out.sentence_probs.push_back(fuse(t, config_.fusion, out.sentence_states[i], out.text_context.contexts[i],
                                        text_fusion_, config_.beta, config_.pairing));
    }

    if (with_video) {
      bool unused = false;
      out.video_context = align(t, out.frame_states, transcript, out.sentence_states, video_attn_, true, unused);
      for (std::size_t j = 0; j < out.frame_states.size(); ++j) {
        out.frame_probs.push_back(fuse(t, config_.fusion, out.frame_states[j], out.video_context.contexts[j],
                                       video_fusion_, config_.beta, config_.pairing));
      }
    }
    return out;
  }

 private:
  /// Context of every query over `targets`, per the configured mode.
  ContextVars align(Tape& t, const std::vector<Var>& queries, const std::vector<Var>& transcript,
                    const std::vector<Var>& targets, const AttentionParams& p, bool reversed,
                    bool& used_bihop) const {
    switch (config_.attention) {
      case AttentionMode::kNone: {
        // The last target state stands in for the whole other modality.
        ContextVars c;
        const Var one = t.constant(Mat::Ones(1, 1));
        for (std::size_t i = 0; i < queries.size(); ++i) {
          c.contexts.push_back(targets.back());
          c.weights.push_back(one);
        }
        return c;
      }
      case AttentionMode::kConcatProduct:
        return context(concat_product_scores(t, queries, targets, p.concat), targets);
      case AttentionMode::kBilinear:
        return context(bilinear_scores(t, queries, targets, p.bilinear), targets);
      case AttentionMode::kBiHop: {
        const bool route_via_transcript = !reversed || config_.reverse_route == ReverseRoute::kAuto;
        if (!transcript.empty() && route_via_transcript) {
          used_bihop = true;
          return bihop(t, queries, transcript, targets, p.hop_first, p.hop_second).second;
        }
        return context(bilinear_scores(t, queries, targets, p.bilinear), targets);
      }
    }
    throw AttentionError("unknown attention mode");
  }

  void build(std::uint64_t seed) {
    const ModelConfig& c = config_;
    if (c.vocab_size < 1 || c.embed_dim < 1 || c.hidden < 1 || c.attn_dim < 1 || c.fusion_hidden < 1 ||
        c.feature_dim < 1) {
      throw ConfigError("model dimensions must be positive");
    }
    if (!(c.beta >= 0.0)) throw ConfigError("beta must be >= 0");
    Rng rng(seed);
    const double k = c.init_scale;
    const int sd = c.state_dim();

    enc_.hidden = c.hidden;
    enc_.sum_pool = c.sum_pool;
    enc_.embedding = &store_.create("encoders/embedding", c.vocab_size, c.embed_dim, rng, k);
    enc_.word = BiLstmParams::create(store_, "encoders/word", c.embed_dim, c.hidden, rng, k);
    enc_.sentence = BiLstmParams::create(store_, "encoders/sentence", sd, c.hidden, rng, k);
    if (!c.use_frames) {
      text_fusion_.unit = FfnParams::create(store_, "fusion/text.f", sd, c.fusion_hidden, rng, k);
      return;
    }
    enc_.frame = BiLstmParams::create(store_, "encoders/frame", c.feature_dim, c.hidden, rng, k);
    if (c.uses_transcript()) {
      enc_.transcript = BiLstmParams::create(store_, "encoders/transcript", c.embed_dim, c.hidden, rng, k);
    }

    for (auto* side : {&text_attn_, &video_attn_}) {
      const std::string prefix = side == &text_attn_ ? "attention/text" : "attention/video";
      switch (c.attention) {
        case AttentionMode::kNone:
          break;
        case AttentionMode::kConcatProduct:
          side->concat = ConcatProductParams::create(store_, prefix + ".concat", sd, sd, c.attn_dim, rng, k);
          break;
        case AttentionMode::kBiHop:
          if (c.uses_transcript()) {
            side->hop_first = BilinearParams::create(store_, prefix + ".hop1", sd, sd, c.attn_dim, rng, k);
            side->hop_second = BilinearParams::create(store_, prefix + ".hop2", sd, sd, c.attn_dim, rng, k);
          }
          [[fallthrough]];
        case AttentionMode::kBilinear:
          side->bilinear = BilinearParams::create(store_, prefix + ".bilinear", sd, sd, c.attn_dim, rng, k);
          break;
      }
    }
    text_fusion_ = create_fusion_params(store_, "fusion/text", c.fusion, sd, sd, c.fusion_hidden, rng, k);
    video_fusion_ = create_fusion_params(store_, "fusion/video", c.fusion, sd, sd, c.fusion_hidden, rng, k);
  }

  ModelConfig config_;
  ParamStore store_;
  EncoderParams enc_;
  AttentionParams text_attn_;
  AttentionParams video_attn_;
  FusionParams text_fusion_;
  FusionParams video_fusion_;
};

inline std::vector<double> values(const std::vector<Var>& scalars) {
  std::vector<double> out;
  out.reserve(scalars.size());
  for (const Var& v : scalars) out.push_back(v.scalar());
  return out;
}

}  // namespace m2sm
