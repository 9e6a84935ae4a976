#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "m2sm/data.hpp"
#include "m2sm/errors.hpp"
#include "m2sm/rouge.hpp"

namespace m2sm {

struct LabelSet {
  std::vector<int> y;  // one entry per sentence, 0 or 1

  /// All-zero label vectors carry no supervision and are skipped by the CE term.
  bool usable() const { return std::find(y.begin(), y.end(), 1) != y.end(); }
  std::size_t size() const { return y.size(); }
};

/// Labeling objective: mean of ROUGE-1 and ROUGE-2 F1 of the selected
/// sentences (document order) against the gold summary.
inline double label_score(const std::vector<Tokens>& sentences, const std::vector<std::size_t>& selected,
                          const std::vector<Tokens>& gold) {
  if (selected.empty()) return 0.0;
  std::vector<std::size_t> order = selected;
  std::sort(order.begin(), order.end());
  std::vector<Tokens> cand;
  cand.reserve(order.size());
  for (auto i : order) cand.push_back(sentences[i]);
  return 0.5 * (rouge_n(cand, gold, 1).f1 + rouge_n(cand, gold, 2).f1);
}

inline std::vector<Tokens> tokenize_lines(const std::vector<std::string>& lines) {
  std::vector<Tokens> out;
  for (const auto& l : lines) {
    Tokens t = tokenize(l);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

/// Greedy extractive labels: repeatedly add the sentence that most improves
/// label_score, stopping when nothing strictly improves it or `cap`
/// sentences are chosen. Ties go to the lower sentence index.
inline LabelSet greedy_labels(const std::vector<Tokens>& sentences, const std::vector<Tokens>& gold,
                              std::size_t cap = 4) {
  if (gold.empty() || all_empty(gold)) throw LabelError("gold summary is empty");
  LabelSet labels{std::vector<int>(sentences.size(), 0)};
  std::vector<std::size_t> selected;
  double current = 0.0;
  while (selected.size() < cap) {
    double best = -1.0;
    std::size_t best_idx = sentences.size();
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (labels.y[i] == 1) continue;
      selected.push_back(i);
      const double sc = label_score(sentences, selected, gold);
      selected.pop_back();
      if (sc > best) {
        best = sc;
        best_idx = i;
      }
    }
    if (best_idx == sentences.size() || !(best > current)) break;
    selected.push_back(best_idx);
    labels.y[best_idx] = 1;
    current = best;
  }
  return labels;
}

inline LabelSet greedy_labels(const Document& doc, const std::vector<std::string>& gold_summary,
                              std::size_t cap = 4) {
  return greedy_labels(doc.sentence_tokens, tokenize_lines(gold_summary), cap);
}

}  // namespace m2sm
