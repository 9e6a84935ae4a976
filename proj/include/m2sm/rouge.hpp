#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "m2sm/errors.hpp"
#include "m2sm/text.hpp"

namespace m2sm {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline Prf make_prf(double overlap, double cand_total, double ref_total) {
  Prf s;
  s.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  s.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  const double d = s.precision + s.recall;
  s.f1 = d > 0 ? 2.0 * s.precision * s.recall / d : 0.0;
  return s;
}

struct RougeScore {
  Prf r1, r2, rl;
};

using NgramCounts = std::unordered_map<std::string, int>;

/// n-gram multiset pooled over sentences; n-grams never cross a sentence
/// boundary.
inline NgramCounts ngram_counts(std::span<const Tokens> sentences, int n) {
  NgramCounts counts;
  for (const auto& s : sentences) {
    if (static_cast<int>(s.size()) < n) continue;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      std::string key = s[i];
      for (int k = 1; k < n; ++k) {
        key += '\x1f';
        key += s[i + k];
      }
      ++counts[key];
    }
  }
  return counts;
}

inline int total(const NgramCounts& c) {
  int t = 0;
  for (const auto& [_, v] : c) t += v;
  return t;
}

inline int clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  int o = 0;
  for (const auto& [k, v] : cand) {
    if (auto it = ref.find(k); it != ref.end()) o += std::min(v, it->second);
  }
  return o;
}

inline bool all_empty(std::span<const Tokens> sentences) {
  return std::all_of(sentences.begin(), sentences.end(), [](const Tokens& t) { return t.empty(); });
}

/// ROUGE-N with clipped counts. n must be 1 or 2.
inline Prf rouge_n(std::span<const Tokens> candidate, std::span<const Tokens> reference, int n) {
  if (n != 1 && n != 2) throw EvalError("rouge_n supports n = 1 or 2, got " + std::to_string(n));
  if (all_empty(reference)) throw EvalError("rouge_n: empty reference");
  const auto c = ngram_counts(candidate, n);
  const auto r = ngram_counts(reference, n);
  return make_prf(clipped_overlap(c, r), total(c), total(r));
}

inline Prf rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
  return rouge_n(std::span<const Tokens>(&candidate, 1), std::span<const Tokens>(&reference, 1), n);
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline Tokens flatten(std::span<const Tokens> sentences) {
  Tokens out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

/// Summary-level ROUGE-L: LCS over the concatenated token sequences.
inline Prf rouge_l(std::span<const Tokens> candidate, std::span<const Tokens> reference) {
  const Tokens c = flatten(candidate);
  const Tokens r = flatten(reference);
  if (r.empty()) throw EvalError("rouge_l: empty reference");
  return make_prf(static_cast<double>(lcs_length(c, r)), static_cast<double>(c.size()),
                  static_cast<double>(r.size()));
}

inline Prf rouge_l(const Tokens& candidate, const Tokens& reference) {
  return rouge_l(std::span<const Tokens>(&candidate, 1), std::span<const Tokens>(&reference, 1));
}

inline RougeScore rouge(std::span<const Tokens> candidate, std::span<const Tokens> reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2), rouge_l(candidate, reference)};
}

/// For every reference image, the best cosine against any selected frame;
/// averaged over references and expressed as a percentage.
template <typename FramesT, typename RefsT>
double cos_image_similarity(const Eigen::MatrixBase<FramesT>& frames, const Eigen::MatrixBase<RefsT>& refs) {
  if (frames.rows() == 0 || refs.rows() == 0) throw EvalError("cos similarity needs nonempty inputs");
  if (frames.cols() != refs.cols()) throw EvalError("cos similarity: feature dimension mismatch");
  const Eigen::MatrixXd f = frames.template cast<double>();
  const Eigen::MatrixXd r = refs.template cast<double>();
  auto normed = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double n = m.row(i).norm();
      if (!(n > 0.0)) throw EvalError("cos similarity: zero-norm feature vector");
      out.row(i) /= n;
    }
    return out;
  };
  const Eigen::MatrixXd sims = normed(r) * normed(f).transpose();  // R x F
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sims.rows(); ++i) acc += sims.row(i).maxCoeff();
  return 100.0 * acc / static_cast<double>(sims.rows());
}

}  // namespace m2sm
