#pragma once

// Library side of the command-line entry points: each cmd_* reads and
// writes the on-disk formats and returns its primary result.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "m2sm/checkpoint.hpp"
#include "m2sm/config.hpp"
#include "m2sm/data.hpp"
#include "m2sm/evaluation.hpp"
#include "m2sm/synth.hpp"
#include "m2sm/training.hpp"

namespace m2sm {

// ---------------------------------------------------------------------------
// Data loading shared by the commands

struct LoadedData {
  DatasetManifest manifest;
  std::vector<Sample> train, val, test;
  Vocabulary vocab;
  int feature_dim = 0;

  std::vector<Sample>& split(Split s) { return s == Split::kTrain ? train : (s == Split::kVal ? val : test); }
  const std::vector<Sample>& split(Split s) const {
    return s == Split::kTrain ? train : (s == Split::kVal ? val : test);
  }
};

/// Loads all three splits. The vocabulary comes from the training split
/// unless `vocab` is given (evaluation against a checkpoint).
inline LoadedData load_data(const RunConfig& cfg, const Vocabulary* vocab = nullptr) {
  if (cfg.manifest.empty()) throw ConfigError("no manifest given");
  LoadedData d;
  d.manifest = load_manifest(cfg.manifest);
  if (d.manifest.split.empty()) d.manifest = split_dataset(d.manifest, cfg.split, cfg.seed);
  const auto opt = cfg.load_options();
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) d.split(s) = load_samples(d.manifest, d.manifest.ids(s), opt);
  d.vocab = vocab ? *vocab : build_vocabulary(d.train);
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    for (auto& sample : d.split(s)) {
      encode_sample(sample, d.vocab);
      if (d.feature_dim == 0) d.feature_dim = static_cast<int>(sample.video.dim());
      if (sample.video.dim() != d.feature_dim) {
        throw SchemaError("sample '" + sample.id + "' has frame dim " + std::to_string(sample.video.dim()) +
                          ", expected " + std::to_string(d.feature_dim));
      }
    }
  }
  return d;
}

/// Planted sentence masks when the dataset carries truth files, otherwise
/// the greedy labels.
inline std::vector<std::vector<int>> sentence_masks(const DatasetManifest& m, const std::vector<Sample>& samples,
                                                    std::size_t label_cap) {
  std::vector<std::vector<int>> out;
  for (const auto& s : samples) {
    const fs::path truth = truth_path(m, s.id);
    if (fs::exists(truth)) {
      out.push_back(load_truth(truth).sentences);
    } else {
      out.push_back(greedy_labels(s.document, s.gold_summary, label_cap).y);
    }
  }
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot open for writing: " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// synth

inline DatasetManifest cmd_synth(const SynthConfig& synth, std::uint64_t seed, const fs::path& out_dir, bool force) {
  synth.validate();
  if (fs::exists(out_dir)) {
    if (!force) throw CliError("output directory " + out_dir.string() + " exists; pass --force to overwrite");
    fs::remove_all(out_dir);
  }
  return synth_generate(synth, seed, out_dir);
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  TrainState state;
  fs::path checkpoint_dir;
  fs::path metrics_path;
};

inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream* progress = nullptr) {
  cfg.validate();
  LoadedData data = load_data(cfg);
  if (data.train.empty() || data.val.empty()) throw ConfigError("train and val splits must be nonempty");
  const auto cap = static_cast<std::size_t>(cfg.label_cap);
  const auto train_set = make_examples(data.train, cap);
  const auto val_set = make_examples(data.val, cap);

  Model model(cfg.model_config(static_cast<int>(data.vocab.size()), data.feature_dim), Rng::derive(cfg.seed, 1));

  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");
  TrainOutcome outcome;
  outcome.metrics_path = out / "metrics.jsonl";
  std::ofstream metrics(outcome.metrics_path, std::ios::binary | std::ios::trunc);
  outcome.state = train(model, train_set, val_set, cfg.train_config(), [&](const EpochRecord& r) {
    metrics << to_json(r).dump() << '\n';
    metrics.flush();
    if (progress) *progress << "epoch " << r.epoch << " train_loss=" << r.train_loss << " val_loss=" << r.val_loss << '\n';
  });
  outcome.checkpoint_dir = out / "checkpoint";
  save_checkpoint(outcome.checkpoint_dir, model, data.vocab);
  return outcome;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOutcome {
  EvalReport report;
  fs::path report_path;
};

inline void check_compatible(const RunConfig& cfg, const ModelConfig& ckpt, int data_feature_dim) {
  auto mismatch = [](const char* what, int a, int b) {
    return CheckpointError(std::string(what) + " is " + std::to_string(a) + " in the config but " + std::to_string(b) +
                           " in the checkpoint");
  };
  if (cfg.embed_dim != ckpt.embed_dim) throw mismatch("embed_dim", cfg.embed_dim, ckpt.embed_dim);
  if (cfg.hidden != ckpt.hidden) throw mismatch("hidden", cfg.hidden, ckpt.hidden);
  if (cfg.attn_dim != ckpt.attn_dim) throw mismatch("attn_dim", cfg.attn_dim, ckpt.attn_dim);
  if (cfg.fusion_hidden != ckpt.fusion_hidden) throw mismatch("fusion_hidden", cfg.fusion_hidden, ckpt.fusion_hidden);
  if (data_feature_dim != ckpt.feature_dim) throw mismatch("frame feature dim", data_feature_dim, ckpt.feature_dim);
}

inline EvalOutcome cmd_eval(const RunConfig& cfg, bool csv = false) {
  cfg.validate();
  const fs::path ckpt_dir = cfg.checkpoint.empty() ? fs::path(cfg.output_dir) / "checkpoint" : fs::path(cfg.checkpoint);
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_dir);
  LoadedData data = load_data(cfg, &ckpt.vocab);
  check_compatible(cfg, ckpt.model.config(), data.feature_dim);

  const auto& samples = data.split(parse_split(cfg.eval_split));
  const auto masks = sentence_masks(data.manifest, samples, static_cast<std::size_t>(cfg.label_cap));
  EvalOutcome outcome;
  outcome.report = evaluate(ckpt.model, samples, static_cast<std::size_t>(cfg.k_sentences),
                            static_cast<std::size_t>(cfg.k_frames), &masks);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  outcome.report_path = out / "report.json";
  write_text(outcome.report_path, to_json(outcome.report).dump(2) + "\n");
  if (csv) write_text(out / "report.csv", to_csv(outcome.report));
  return outcome;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationCell {
  std::string group;  // matrix | ratio_sweep | beta_sweep
  std::string fusion;
  std::string attention;
  std::string training;  // ce | +video-loss | +weighted
  double alpha_ts = 1.0;
  double alpha_vs = 0.0;
  double beta = 0.3;

  bool ok = false;
  std::string error;
  int epochs_run = 0;
  double initial_train_ce = 0.0;
  double final_train_ce = 0.0;
  double best_val = 0.0;
  double train_label_f1 = 0.0;
  double test_r1 = 0.0, test_r2 = 0.0, test_rl = 0.0;
};

inline nlohmann::json to_json(const AblationCell& c) {
  nlohmann::json j = {{"group", c.group},         {"fusion", c.fusion}, {"attention", c.attention},
                      {"training", c.training},   {"alpha_ts", c.alpha_ts}, {"alpha_vs", c.alpha_vs},
                      {"beta", c.beta},           {"ok", c.ok}};
  if (c.ok) {
    j["epochs_run"] = c.epochs_run;
    j["initial_train_ce"] = c.initial_train_ce;
    j["final_train_ce"] = c.final_train_ce;
    j["best_val"] = c.best_val;
    j["train_label_f1"] = c.train_label_f1;
    j["test"] = {{"r1", c.test_r1}, {"r2", c.test_r2}, {"rl", c.test_rl}};
  } else {
    j["error"] = c.error;
  }
  return j;
}

/// The 4 fusion x 4 attention x 3 training matrix, followed (optionally) by
/// the alpha_ts/alpha_vs ratio sweep and the beta sweep on the full model.
inline std::vector<AblationCell> ablation_cells(bool sweeps) {
  std::vector<AblationCell> cells;
  for (const char* fusion : {"early", "tensor", "late", "late_plus"}) {
    for (const char* attention : {"none", "concat_product", "bilinear", "bihop"}) {
      cells.push_back({"matrix", fusion, attention, "ce", 1.0, 0.0});
      cells.push_back({"matrix", fusion, attention, "+video-loss", 1.0, 1.0});
      cells.push_back({"matrix", fusion, attention, "+weighted", 3.33, 1.0});
    }
  }
  if (sweeps) {
    for (double ratio : {1.0, 2.0, 3.33, 5.0}) cells.push_back({"ratio_sweep", "late_plus", "bihop", "+weighted", ratio, 1.0});
    for (double beta : {0.0, 0.1, 0.3, 0.5, 1.0}) {
      AblationCell c{"beta_sweep", "late_plus", "bihop", "+weighted", 3.33, 1.0};
      c.beta = beta;
      cells.push_back(c);
    }
  }
  return cells;
}

inline void run_ablation_cell(AblationCell& cell, const RunConfig& base, const LoadedData& data,
                              const std::vector<TrainingExample>& train_set,
                              const std::vector<TrainingExample>& val_set,
                              const std::vector<std::vector<int>>& train_masks, std::uint64_t seed) {
  RunConfig cfg = base;
  cfg.fusion = cell.fusion;
  cfg.attention = cell.attention;
  cfg.alpha_ts = cell.alpha_ts;
  cfg.alpha_vs = cell.alpha_vs;
  cfg.beta = cell.beta;
  cfg.use_frames = true;
  cfg.use_bistream = cell.alpha_vs > 0.0;
  cfg.epochs = base.ablation_epochs;
  cfg.seed = seed;
  cfg.validate();
  Model model(cfg.model_config(static_cast<int>(data.vocab.size()), data.feature_dim), Rng::derive(seed, 1));
  const TrainState st = train(model, train_set, val_set, cfg.train_config());
  cell.epochs_run = st.epoch;
  cell.initial_train_ce = st.initial_train_ce;
  cell.final_train_ce = mean_ce(model, train_set);
  cell.best_val = st.best_val;
  const auto k_s = static_cast<std::size_t>(cfg.k_sentences);
  const auto k_f = static_cast<std::size_t>(cfg.k_frames);
  cell.train_label_f1 = evaluate(model, data.train, k_s, k_f, &train_masks).corpus_mean.label_f1.value_or(0.0);
  if (!data.test.empty()) {
    const auto rep = evaluate(model, data.test, k_s, k_f);
    cell.test_r1 = rep.corpus_mean.r1;
    cell.test_r2 = rep.corpus_mean.r2;
    cell.test_rl = rep.corpus_mean.rl;
  }
  cell.ok = true;
}

struct AblationOutcome {
  std::vector<AblationCell> cells;
  fs::path report_path;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok; }));
  }
};

inline std::string format_ablation_table(const std::vector<AblationCell>& cells) {
  std::string out = "group        fusion     attention       training     a_ts  a_vs  beta   trainF1  R-1     R-2     R-L\n";
  char buf[256];
  for (const auto& c : cells) {
    if (c.ok) {
      std::snprintf(buf, sizeof buf, "%-12s %-10s %-15s %-12s %4.2f  %4.2f  %4.2f   %6.3f  %6.4f  %6.4f  %6.4f\n",
                    c.group.c_str(), c.fusion.c_str(), c.attention.c_str(), c.training.c_str(), c.alpha_ts,
                    c.alpha_vs, c.beta, c.train_label_f1, c.test_r1, c.test_r2, c.test_rl);
    } else {
      std::snprintf(buf, sizeof buf, "%-12s %-10s %-15s %-12s FAILED: %s\n", c.group.c_str(), c.fusion.c_str(),
                    c.attention.c_str(), c.training.c_str(), c.error.c_str());
    }
    out += buf;
  }
  return out;
}

/// Runs every cell with an independent derived seed; failures are recorded
/// per cell and never stop the matrix.
inline AblationOutcome cmd_ablate(const RunConfig& cfg) {
  cfg.validate();
  LoadedData data = load_data(cfg);
  if (data.train.empty() || data.val.empty()) throw ConfigError("train and val splits must be nonempty");
  const auto cap = static_cast<std::size_t>(cfg.label_cap);
  const auto train_set = make_examples(data.train, cap);
  const auto val_set = make_examples(data.val, cap);
  const auto train_masks = sentence_masks(data.manifest, data.train, cap);

  AblationOutcome outcome;
  outcome.cells = ablation_cells(cfg.ablation_sweeps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < outcome.cells.size(); i = next++) {
      AblationCell& cell = outcome.cells[i];
      try {
        run_ablation_cell(cell, cfg, data, train_set, val_set, train_masks, Rng::derive(cfg.seed, 1000 + i));
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto jobs = static_cast<std::size_t>(cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs) : hw);
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < std::min(jobs, outcome.cells.size()); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : outcome.cells) rows.push_back(to_json(c));
  outcome.report_path = out / "ablation.json";
  write_text(outcome.report_path, nlohmann::json{{"cells", rows}}.dump(2) + "\n");
  return outcome;
}

// ---------------------------------------------------------------------------
// overlap

inline OverlapReport cmd_overlap(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.manifest.empty()) throw ConfigError("no manifest given");
  const DatasetManifest m = load_manifest(cfg.manifest);
  std::vector<std::string> ids;
  for (const auto& e : m.entries) ids.push_back(e.id);
  const auto samples = load_samples(m, ids, cfg.load_options());
  const bool any = std::any_of(samples.begin(), samples.end(), [](const Sample& s) { return !s.transcript.empty(); });
  if (!any) throw CliError("dataset has no transcripts");
  OverlapReport rep = overlap_report(samples);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  write_text(out / "overlap.json", to_json(rep).dump(2) + "\n");
  return rep;
}

}  // namespace m2sm
