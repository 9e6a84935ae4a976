#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "m2sm/data.hpp"
#include "m2sm/labels.hpp"
#include "m2sm/model.hpp"
#include "m2sm/rouge.hpp"

namespace m2sm {

struct SummaryOutput {
  std::vector<std::size_t> sentences;  // strictly increasing
  std::vector<std::size_t> frames;     // strictly increasing
  std::vector<double> sentence_probs;
  std::vector<double> frame_probs;
  std::vector<std::string> warnings;
};

/// Indices of the k largest scores, returned in increasing index order.
/// Equal scores prefer the lower index.
inline std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline SummaryOutput summarize(const Model& model, const Sample& sample, std::size_t k_sentences,
                               std::size_t k_frames) {
  SummaryOutput out;
  Tape t;
  const bool video = model.config().use_frames;
  const auto fp = model.forward(t, sample, video);
  out.sentence_probs = values(fp.sentence_probs);
  out.frame_probs = values(fp.frame_probs);
  if (k_sentences > out.sentence_probs.size()) {
    out.warnings.push_back("k_sentences=" + std::to_string(k_sentences) + " clamped to " +
                           std::to_string(out.sentence_probs.size()));
  }
  if (video && k_frames > out.frame_probs.size()) {
    out.warnings.push_back("k_frames=" + std::to_string(k_frames) + " clamped to " +
                           std::to_string(out.frame_probs.size()));
  }
  out.sentences = top_k(out.sentence_probs, k_sentences);
  out.frames = top_k(out.frame_probs, k_frames);
  return out;
}

/// F1 between a predicted index set and a 0/1 mask.
inline double selection_f1(const std::vector<std::size_t>& predicted, const std::vector<int>& mask) {
  const auto positives = static_cast<double>(std::count(mask.begin(), mask.end(), 1));
  double hit = 0.0;
  for (auto i : predicted) {
    if (i < mask.size() && mask[i] == 1) hit += 1.0;
  }
  return make_prf(hit, static_cast<double>(predicted.size()), positives).f1;
}

struct SampleReport {
  std::string id;
  SummaryOutput summary;
  RougeScore rouge;
  std::optional<double> cos;
  std::optional<double> label_f1;
};

struct CorpusMean {
  double r1 = 0.0, r2 = 0.0, rl = 0.0;
  std::optional<double> cos;
  std::optional<double> label_f1;
};

struct EvalReport {
  std::vector<SampleReport> per_sample;
  CorpusMean corpus_mean;
  std::vector<std::string> warnings;
};

inline SampleReport evaluate_sample(const Model& model, const Sample& sample, std::size_t k_sentences,
                                    std::size_t k_frames, const std::vector<int>* label_mask) {
  SampleReport r;
  r.id = sample.id;
  r.summary = summarize(model, sample, k_sentences, k_frames);
  std::vector<Tokens> cand;
  for (auto i : r.summary.sentences) cand.push_back(sample.document.sentence_tokens[i]);
  r.rouge = rouge(cand, tokenize_lines(sample.gold_summary));
  if (sample.ref_image_features && !r.summary.frames.empty()) {
    Eigen::MatrixXf chosen(static_cast<Eigen::Index>(r.summary.frames.size()), sample.video.dim());
    for (std::size_t k = 0; k < r.summary.frames.size(); ++k) {
      chosen.row(static_cast<Eigen::Index>(k)) = sample.video.frames.row(static_cast<Eigen::Index>(r.summary.frames[k]));
    }
    r.cos = cos_image_similarity(chosen, *sample.ref_image_features);
  }
  if (label_mask) r.label_f1 = selection_f1(r.summary.sentences, *label_mask);
  return r;
}

/// Evaluates every sample; `masks`, when given, supplies the sentence labels
/// used for label-recovery F1 (aligned with `samples`).
inline EvalReport evaluate(const Model& model, const std::vector<Sample>& samples, std::size_t k_sentences,
                           std::size_t k_frames, const std::vector<std::vector<int>>* masks = nullptr) {
  EvalReport rep;
  double cos_sum = 0.0, f1_sum = 0.0;
  int cos_n = 0, f1_n = 0;
  bool missing_refs = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto r = evaluate_sample(model, samples[i], k_sentences, k_frames, masks ? &(*masks)[i] : nullptr);
    rep.corpus_mean.r1 += r.rouge.r1.f1;
    rep.corpus_mean.r2 += r.rouge.r2.f1;
    rep.corpus_mean.rl += r.rouge.rl.f1;
    if (r.cos) {
      cos_sum += *r.cos;
      ++cos_n;
    } else {
      missing_refs = true;
    }
    if (r.label_f1) {
      f1_sum += *r.label_f1;
      ++f1_n;
    }
    for (const auto& w : r.summary.warnings) rep.warnings.push_back(samples[i].id + ": " + w);
    rep.per_sample.push_back(std::move(r));
  }
  if (!samples.empty()) {
    const auto n = static_cast<double>(samples.size());
    rep.corpus_mean.r1 /= n;
    rep.corpus_mean.r2 /= n;
    rep.corpus_mean.rl /= n;
  }
  if (cos_n > 0) rep.corpus_mean.cos = cos_sum / cos_n;
  if (missing_refs) rep.warnings.push_back("reference image features missing for some samples; Cos omitted there");
  if (f1_n > 0) rep.corpus_mean.label_f1 = f1_sum / f1_n;
  return rep;
}

inline nlohmann::json to_json(const EvalReport& rep) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : rep.per_sample) {
    nlohmann::json j = {{"id", r.id},
                        {"selected_sentences", r.summary.sentences},
                        {"selected_frames", r.summary.frames},
                        {"r1", r.rouge.r1.f1},
                        {"r2", r.rouge.r2.f1},
                        {"rl", r.rouge.rl.f1}};
    if (r.cos) j["cos"] = *r.cos;
    if (r.label_f1) j["label_f1"] = *r.label_f1;
    per.push_back(std::move(j));
  }
  nlohmann::json mean = {{"r1", rep.corpus_mean.r1}, {"r2", rep.corpus_mean.r2}, {"rl", rep.corpus_mean.rl}};
  if (rep.corpus_mean.cos) mean["cos"] = *rep.corpus_mean.cos;
  if (rep.corpus_mean.label_f1) mean["label_f1"] = *rep.corpus_mean.label_f1;
  return {{"per_sample", per}, {"corpus_mean", mean}};
}

inline std::string to_csv(const EvalReport& rep) {
  std::ostringstream os;
  os << "id,r1,r2,rl,cos,label_f1\n";
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& r : rep.per_sample) {
    os << r.id << ',' << r.rouge.r1.f1 << ',' << r.rouge.r2.f1 << ',' << r.rouge.rl.f1 << ',' << opt(r.cos) << ','
       << opt(r.label_f1) << '\n';
  }
  os << "corpus_mean," << rep.corpus_mean.r1 << ',' << rep.corpus_mean.r2 << ',' << rep.corpus_mean.rl << ','
     << opt(rep.corpus_mean.cos) << ',' << opt(rep.corpus_mean.label_f1) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Transcript overlap statistics

struct OverlapRow {
  double r1 = 0.0, r2 = 0.0, rl = 0.0;  // corpus-mean F1, scaled to 0..100
};

struct OverlapReport {
  OverlapRow article;
  OverlapRow reference;
  std::size_t samples = 0;
};

/// Mean ROUGE F1 of each transcript (as candidate) against its article and
/// against its reference summary.
inline OverlapReport overlap_report(const std::vector<Tokens>& transcripts,
                                    const std::vector<std::vector<Tokens>>& articles,
                                    const std::vector<std::vector<Tokens>>& references) {
  if (transcripts.size() != articles.size() || transcripts.size() != references.size()) {
    throw EvalError("overlap_report: transcripts, articles and references must align");
  }
  OverlapReport rep;
  rep.samples = transcripts.size();
  if (transcripts.empty()) return rep;
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    const std::vector<Tokens> cand = {transcripts[i]};
    const auto a = rouge(cand, articles[i]);
    const auto r = rouge(cand, references[i]);
    rep.article.r1 += a.r1.f1;
    rep.article.r2 += a.r2.f1;
    rep.article.rl += a.rl.f1;
    rep.reference.r1 += r.r1.f1;
    rep.reference.r2 += r.r2.f1;
    rep.reference.rl += r.rl.f1;
  }
  const double k = 100.0 / static_cast<double>(transcripts.size());
  for (OverlapRow* row : {&rep.article, &rep.reference}) {
    row->r1 *= k;
    row->r2 *= k;
    row->rl *= k;
  }
  return rep;
}

inline OverlapReport overlap_report(const std::vector<Sample>& samples) {
  std::vector<Tokens> transcripts;
  std::vector<std::vector<Tokens>> articles, references;
  for (const auto& s : samples) {
    transcripts.push_back(s.transcript.token_strings);
    articles.push_back(s.document.sentence_tokens);
    references.push_back(tokenize_lines(s.gold_summary));
  }
  return overlap_report(transcripts, articles, references);
}

inline std::string format_overlap_table(const OverlapReport& rep) {
  char buf[256];
  std::string out = "            R-1     R-2     R-L\n";
  std::snprintf(buf, sizeof buf, "article    %6.2f  %6.2f  %6.2f\n", rep.article.r1, rep.article.r2, rep.article.rl);
  out += buf;
  std::snprintf(buf, sizeof buf, "reference  %6.2f  %6.2f  %6.2f\n", rep.reference.r1, rep.reference.r2,
                rep.reference.rl);
  out += buf;
  return out;
}

inline nlohmann::json to_json(const OverlapReport& rep) {
  auto row = [](const OverlapRow& r) { return nlohmann::json{{"r1", r.r1}, {"r2", r.r2}, {"rl", r.rl}}; };
  return {{"samples", rep.samples}, {"article", row(rep.article)}, {"reference", row(rep.reference)}};
}

}  // namespace m2sm
