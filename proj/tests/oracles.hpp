#pragma once

// Reference implementations written independently of the library, used as
// test oracles.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "m2sm/rng.hpp"

namespace oracle {

using Sentence = std::vector<std::string>;

inline std::map<std::vector<std::string>, int> grams(const std::vector<Sentence>& sents, int n) {
  std::map<std::vector<std::string>, int> out;
  for (const auto& s : sents) {
    for (int i = 0; i + n <= static_cast<int>(s.size()); ++i) ++out[Sentence(s.begin() + i, s.begin() + i + n)];
  }
  return out;
}

inline double rouge_n_f1(const std::vector<Sentence>& cand, const std::vector<Sentence>& ref, int n) {
  const auto c = grams(cand, n), r = grams(ref, n);
  int total_c = 0, total_r = 0, hit = 0;
  for (const auto& [g, k] : c) total_c += k;
  for (const auto& [g, k] : r) {
    total_r += k;
    if (auto it = c.find(g); it != c.end()) hit += std::min(k, it->second);
  }
  if (hit == 0) return 0.0;
  const double p = static_cast<double>(hit) / total_c, rec = static_cast<double>(hit) / total_r;
  return 2 * p * rec / (p + rec);
}

inline double label_score(const std::vector<Sentence>& doc, const std::vector<int>& chosen,
                          const std::vector<Sentence>& gold) {
  if (chosen.empty()) return 0.0;
  std::vector<int> sorted = chosen;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Sentence> cand;
  for (int i : sorted) cand.push_back(doc[i]);
  return 0.5 * (rouge_n_f1(cand, gold, 1) + rouge_n_f1(cand, gold, 2));
}

/// Best label score over every subset of at most `cap` sentences.
inline double exhaustive_best(const std::vector<Sentence>& doc, const std::vector<Sentence>& gold, int cap) {
  const int n = static_cast<int>(doc.size());
  double best = 0.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) > cap) continue;
    std::vector<int> chosen;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) chosen.push_back(i);
    }
    best = std::max(best, label_score(doc, chosen, gold));
  }
  return best;
}

struct LabelFixture {
  std::vector<Sentence> doc;
  std::vector<Sentence> gold;
};

/// Article of 2..max_sentences random sentences over a `vocab`-word
/// vocabulary; the gold summary copies fragments of a few of them and adds
/// some novel words, the way abstractive highlights reuse article phrasing.
inline LabelFixture fragment_fixture(m2sm::Rng& rng, int max_sentences = 8, int vocab = 50) {
  auto word = [&](int id) { return "t" + std::to_string(id); };
  LabelFixture f;
  const int ns = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(max_sentences - 1)));
  for (int i = 0; i < ns; ++i) {
    Sentence s;
    const int len = 3 + static_cast<int>(rng.index(10));
    for (int k = 0; k < len; ++k) s.push_back(word(static_cast<int>(rng.index(static_cast<std::size_t>(vocab)))));
    f.doc.push_back(std::move(s));
  }
  const int gold_lines = 1 + static_cast<int>(rng.index(3));
  for (int g = 0; g < gold_lines; ++g) {
    const Sentence& src = f.doc[rng.index(f.doc.size())];
    const std::size_t start = rng.index(src.size());
    const std::size_t len = 1 + rng.index(src.size() - start);
    Sentence line(src.begin() + static_cast<std::ptrdiff_t>(start),
                  src.begin() + static_cast<std::ptrdiff_t>(start + len));
    const int novel = static_cast<int>(rng.index(3));
    for (int k = 0; k < novel; ++k) line.push_back(word(vocab + static_cast<int>(rng.index(static_cast<std::size_t>(vocab * 3)))));
    f.gold.push_back(std::move(line));
  }
  return f;
}

/// Ordered-pair mean of (1 - cosine).
inline double diversity(const std::vector<std::vector<double>>& frames) {
  const std::size_t k = frames.size();
  if (k < 2) return 0.0;
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) acc += 1.0 - dot(frames[i], frames[j]) / std::sqrt(dot(frames[i], frames[i]) * dot(frames[j], frames[j]));
    }
  }
  return acc / static_cast<double>(k * (k - 1));
}

}  // namespace oracle
