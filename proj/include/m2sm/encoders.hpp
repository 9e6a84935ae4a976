#pragma once

// Hierarchical article encoder, frame-sequence encoder, and transcript
// encoder. All three run bidirectional LSTMs; every output state is the
// concatenation [forward; backward] of width 2h.

#include <span>
#include <string>
#include <vector>

#include "m2sm/errors.hpp"
#include "m2sm/params.hpp"
#include "m2sm/text.hpp"

namespace m2sm {

struct EncoderParams {
  Param* embedding = nullptr;  // V x E
  BiLstmParams word;
  BiLstmParams sentence;
  BiLstmParams frame;
  BiLstmParams transcript;
  int hidden = 0;
  bool sum_pool = false;  // sum word states instead of averaging them

  bool has_frames() const { return frame.fwd.w != nullptr; }
  bool has_transcript() const { return transcript.fwd.w != nullptr; }
};

struct SentenceStates {
  std::vector<Var> states;                   // s_i, 2h x 1
  std::vector<std::vector<Var>> word_states;  // h_i^j
  std::vector<Var> pooled;                   // ap_i
};

/// Runs one LSTM direction; the output is aligned with the input positions.
inline std::vector<Var> run_lstm(Tape& t, const LstmParams& p, std::span<const Var> inputs, bool reverse) {
  const int h = p.hidden;
  std::vector<Var> out(inputs.size());
  Var hs = t.constant(Mat::Zero(h, 1));
  Var cs = t.constant(Mat::Zero(h, 1));
  const Var w = t.param(*p.w);
  const Var b = t.param(*p.b);
  const std::size_t n = inputs.size();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t pos = reverse ? n - 1 - step : step;
    const Var z = ad::affine(w, ad::concat(inputs[pos], hs), b);
    const Var in_gate = ad::sigmoid(ad::slice_rows(z, 0, h));
    const Var forget = ad::sigmoid(ad::slice_rows(z, h, h));
    const Var out_gate = ad::sigmoid(ad::slice_rows(z, 2 * h, h));
    const Var cand = ad::tanh(ad::slice_rows(z, 3 * h, h));
    cs = ad::add(ad::mul(forget, cs), ad::mul(in_gate, cand));
    hs = ad::mul(out_gate, ad::tanh(cs));
    out[pos] = hs;
  }
  return out;
}

inline std::vector<Var> run_bilstm(Tape& t, const BiLstmParams& p, std::span<const Var> inputs) {
  const auto f = run_lstm(t, p.fwd, inputs, false);
  const auto b = run_lstm(t, p.bwd, inputs, true);
  std::vector<Var> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back(ad::concat(f[i], b[i]));
  return out;
}

inline std::vector<Var> embed(Tape& t, const EncoderParams& p, const TokenIds& tokens) {
  const Var table = t.param(*p.embedding);
  std::vector<Var> out;
  out.reserve(tokens.size());
  for (TokenId id : tokens) {
    if (id < 0 || id >= table.rows()) {
      throw EncodeError("token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(table.rows()));
    }
    out.push_back(ad::row(table, id));
  }
  return out;
}

inline std::vector<Var> encode_words(Tape& t, const EncoderParams& p, const TokenIds& sentence) {
  if (sentence.empty()) throw EncodeError("cannot encode an empty sentence");
  const auto emb = embed(t, p, sentence);
  return run_bilstm(t, p.word, emb);
}

inline SentenceStates encode_sentences(Tape& t, const EncoderParams& p, const std::vector<TokenIds>& sentences) {
  if (sentences.empty()) throw EncodeError("document has no sentences");
  SentenceStates out;
  for (const auto& sent : sentences) {
    auto words = encode_words(t, p, sent);
    out.pooled.push_back(p.sum_pool ? ad::sum_all(words) : ad::mean(words));
    out.word_states.push_back(std::move(words));
  }
  out.states = run_bilstm(t, p.sentence, out.pooled);
  return out;
}

/// Frame states m_j from a [NM x D_v] feature matrix.
inline std::vector<Var> encode_frames(Tape& t, const EncoderParams& p, const Eigen::MatrixXd& frames) {
  if (!p.has_frames()) throw EncodeError("model was built without a frame encoder");
  if (frames.rows() < 1) throw EncodeError("video has no frames");
  if (frames.cols() != p.frame.fwd.input) {
    throw EncodeError("frame feature dim " + std::to_string(frames.cols()) + " does not match encoder input " +
                      std::to_string(p.frame.fwd.input));
  }
  std::vector<Var> inputs;
  inputs.reserve(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index i = 0; i < frames.rows(); ++i) inputs.push_back(t.constant(frames.row(i).transpose()));
  return run_bilstm(t, p.frame, inputs);
}

/// Transcript token states; an empty transcript yields no states.
inline std::vector<Var> encode_transcript(Tape& t, const EncoderParams& p, const TokenIds& tokens) {
  if (tokens.empty()) return {};
  if (!p.has_transcript()) throw EncodeError("model was built without a transcript encoder");
  const auto emb = embed(t, p, tokens);
  return run_bilstm(t, p.transcript, emb);
}

/// Stacks 2h x 1 state vectors into an N x 2h value matrix.
inline Eigen::MatrixXd state_matrix(std::span<const Var> states) {
  if (states.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(states.size()), states.front().rows());
  for (std::size_t i = 0; i < states.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = states[i].value().transpose();
  return m;
}

}  // namespace m2sm
