#pragma once

// Cross-modal alignment: concat-product (additive) scores, bilinear scores
// with single projections and dual interaction, softmax contexts, and the
// bi-hop route through transcript states in both directions.
//
// Score "rows" are column vectors: rows[i] holds the scores of query i
// against every key.

#include <span>
#include <string>
#include <vector>

#include "m2sm/errors.hpp"
#include "m2sm/params.hpp"

namespace m2sm {

enum class AttentionMode { kNone, kConcatProduct, kBilinear, kBiHop };

inline std::string to_string(AttentionMode m) {
  switch (m) {
    case AttentionMode::kNone: return "none";
    case AttentionMode::kConcatProduct: return "concat_product";
    case AttentionMode::kBilinear: return "bilinear";
    case AttentionMode::kBiHop: return "bihop";
  }
  return "none";
}

inline AttentionMode parse_attention(const std::string& s) {
  if (s == "none") return AttentionMode::kNone;
  if (s == "concat_product") return AttentionMode::kConcatProduct;
  if (s == "bilinear") return AttentionMode::kBilinear;
  if (s == "bihop") return AttentionMode::kBiHop;
  throw ConfigError("attention must be one of none|concat_product|bilinear|bihop, got '" + s + "'");
}

/// e_i^j = V^T tanh(W_s s_i + W_m m_j + b_attn)
struct ConcatProductParams {
  Param* w_query = nullptr;  // W_s: d_a x query_dim
  Param* w_key = nullptr;    // W_m: d_a x key_dim
  Param* bias = nullptr;     // b_attn
  Param* v = nullptr;        // d_a x 1

  static ConcatProductParams create(ParamStore& store, const std::string& prefix, int query_dim, int key_dim,
                                    int attn_dim, Rng& rng, double scale) {
    return {&store.create(prefix + ".W_s", attn_dim, query_dim, rng, scale),
            &store.create(prefix + ".W_m", attn_dim, key_dim, rng, scale),
            &store.create(prefix + ".b_attn", attn_dim, 1, rng, scale),
            &store.create(prefix + ".V", attn_dim, 1, rng, scale)};
  }
};

/// q_j = tanh(W_m m_j + b_m), r_i = tanh(W_s s_i + b_s),
/// e_i^j = V^T (q_j . r_i + q_j + r_i)
struct BilinearParams {
  Param* w_query = nullptr;  // W_s
  Param* b_query = nullptr;  // b_s
  Param* w_key = nullptr;    // W_m
  Param* b_key = nullptr;    // b_m
  Param* v = nullptr;

  static BilinearParams create(ParamStore& store, const std::string& prefix, int query_dim, int key_dim,
                               int attn_dim, Rng& rng, double scale) {
    return {&store.create(prefix + ".W_s", attn_dim, query_dim, rng, scale),
            &store.create(prefix + ".b_s", attn_dim, 1, rng, scale),
            &store.create(prefix + ".W_m", attn_dim, key_dim, rng, scale),
            &store.create(prefix + ".b_m", attn_dim, 1, rng, scale),
            &store.create(prefix + ".V", attn_dim, 1, rng, scale)};
  }
};

/// Parameters for one direction (sentence->frame, or frame->sentence when
/// reversed). Only the sets the configured mode needs are allocated.
struct AttentionParams {
  ConcatProductParams concat;
  BilinearParams bilinear;   // single-hop, also the bi-hop fallback
  BilinearParams hop_first;  // transcript over the target modality
  BilinearParams hop_second; // queries over first-hop contexts
};

struct ContextVars {
  std::vector<Var> contexts;  // one per query
  std::vector<Var> weights;   // one NK x 1 column per query
};

inline void check_dims(std::span<const Var> states, const Param* w, const char* what) {
  for (const Var& s : states) {
    if (s.cols() != 1 || s.rows() != w->value.cols()) {
      throw AttentionError(std::string(what) + " state has dim " + std::to_string(s.rows()) +
                           ", projection expects " + std::to_string(w->value.cols()));
    }
  }
}

inline std::vector<Var> concat_product_scores(Tape& t, std::span<const Var> queries, std::span<const Var> keys,
                                              const ConcatProductParams& p) {
  check_dims(queries, p.w_query, "query");
  check_dims(keys, p.w_key, "key");
  const Var ws = t.param(*p.w_query);
  const Var wm = t.param(*p.w_key);
  const Var b = t.param(*p.bias);
  const Var v = t.param(*p.v);
  std::vector<Var> key_proj;
  for (const Var& k : keys) key_proj.push_back(ad::affine(wm, k, b));
  std::vector<Var> rows;
  for (const Var& q : queries) {
    const Var qp = ad::matmul(ws, q);
    std::vector<Var> row;
    for (const Var& kp : key_proj) row.push_back(ad::dot(v, ad::tanh(ad::add(qp, kp))));
    rows.push_back(ad::concat(row));
  }
  return rows;
}

inline std::vector<Var> bilinear_scores(Tape& t, std::span<const Var> queries, std::span<const Var> keys,
                                        const BilinearParams& p) {
  check_dims(queries, p.w_query, "query");
  check_dims(keys, p.w_key, "key");
  const Var v = t.param(*p.v);
  std::vector<Var> q_proj;  // q_j over keys
  for (const Var& k : keys) q_proj.push_back(ad::tanh(ad::affine(t.param(*p.w_key), k, t.param(*p.b_key))));
  std::vector<Var> rows;
  for (const Var& query : queries) {
    const Var r = ad::tanh(ad::affine(t.param(*p.w_query), query, t.param(*p.b_query)));
    std::vector<Var> row;
    for (const Var& q : q_proj) {
      const Var dif = ad::mul(q, r);
      const Var cf = ad::add(q, r);
      row.push_back(ad::dot(v, ad::add(dif, cf)));
    }
    rows.push_back(ad::concat(row));
  }
  return rows;
}

/// Row softmax of the scores and the weighted sum of `values`.
inline ContextVars context(std::span<const Var> score_rows, std::span<const Var> values) {
  if (values.empty()) throw AttentionError("attention over zero keys");
  ContextVars out;
  const Var value_mat = ad::hstack(values);  // D x NK
  for (const Var& e : score_rows) {
    if (e.rows() != static_cast<Eigen::Index>(values.size())) {
      throw AttentionError("score row length does not match the number of values");
    }
    const Var a = ad::softmax(e);
    out.weights.push_back(a);
    out.contexts.push_back(ad::matmul(value_mat, a));
  }
  return out;
}

struct BiHopVars {
  ContextVars first;   // ct2m: transcript tokens over the target modality
  ContextVars second;  // queries over first.contexts
};

/// Two chained bilinear hops: transcript states attend over `targets`
/// (first hop), then every query attends over those transcript contexts.
/// Sentence->frame: queries = sentences, targets = frames (ca2m).
/// Reversed: queries = frames, targets = sentences.
inline BiHopVars bihop(Tape& t, std::span<const Var> queries, std::span<const Var> transcript,
                       std::span<const Var> targets, const BilinearParams& first, const BilinearParams& second) {
  if (transcript.empty()) throw BiHopUnavailable("bi-hop attention needs a nonempty transcript");
  BiHopVars out;
  out.first = context(bilinear_scores(t, transcript, targets, first), targets);
  out.second = context(bilinear_scores(t, queries, out.first.contexts, second), out.first.contexts);
  return out;
}

inline ContextVars bihop_context(Tape& t, std::span<const Var> sentences, std::span<const Var> transcript,
                                 std::span<const Var> frames, const BilinearParams& first,
                                 const BilinearParams& second) {
  return bihop(t, sentences, transcript, frames, first, second).second;
}

inline ContextVars reverse_context(Tape& t, std::span<const Var> frames, std::span<const Var> transcript,
                                   std::span<const Var> sentences, const BilinearParams& first,
                                   const BilinearParams& second) {
  return bihop(t, frames, transcript, sentences, first, second).second;
}

// ---------------------------------------------------------------------------
// Value-level helpers over plain matrices.

struct AttentionContext {
  Eigen::MatrixXd contexts;  // NQ x D
  Eigen::MatrixXd weights;   // NQ x NK
};

/// Rows of a [N x D] matrix as tape constants.
inline std::vector<Var> constant_rows(Tape& t, const Eigen::MatrixXd& m) {
  std::vector<Var> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(t.constant(m.row(i).transpose()));
  return out;
}

inline AttentionContext to_matrices(const ContextVars& c) {
  AttentionContext out;
  if (c.contexts.empty()) return out;
  out.contexts.resize(static_cast<Eigen::Index>(c.contexts.size()), c.contexts.front().rows());
  out.weights.resize(static_cast<Eigen::Index>(c.weights.size()), c.weights.front().rows());
  for (std::size_t i = 0; i < c.contexts.size(); ++i) {
    out.contexts.row(static_cast<Eigen::Index>(i)) = c.contexts[i].value().transpose();
    out.weights.row(static_cast<Eigen::Index>(i)) = c.weights[i].value().transpose();
  }
  return out;
}

/// Softmax over each row of `scores` and the weighted sum of `values` rows.
inline AttentionContext context(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& values) {
  if (values.rows() == 0) throw AttentionError("attention over zero keys");
  if (scores.cols() != values.rows()) throw AttentionError("score columns must equal value rows");
  Tape t;
  return to_matrices(context(constant_rows(t, scores), constant_rows(t, values)));
}

inline Eigen::MatrixXd score_matrix(std::span<const Var> rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd e(static_cast<Eigen::Index>(rows.size()), rows.front().rows());
  for (std::size_t i = 0; i < rows.size(); ++i) e.row(static_cast<Eigen::Index>(i)) = rows[i].value().transpose();
  return e;
}

}  // namespace m2sm
