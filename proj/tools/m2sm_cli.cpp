// m2sm: synthetic data generation, training, evaluation, ablations and
// transcript-overlap statistics for the multi-modal summarizer.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "m2sm/m2sm.hpp"

namespace {

using m2sm::RunConfig;

/// CLI values are held as optionals so they can be layered on top of the
/// config file and the environment after parsing.
struct RunFlags {
  std::string config_file;
  std::optional<std::string> manifest, output_dir, checkpoint, attention, fusion, pairing, reverse_route, eval_split;
  std::optional<int> embed_dim, hidden, attn_dim, fusion_hidden, feature_dim, epochs, patience, k_sentences, k_frames,
      fps_group, min_raw_frames, label_cap, ablation_epochs, jobs;
  std::optional<double> beta, alpha_ts, alpha_vs, lr, init_scale;
  std::optional<std::uint64_t> seed;
  bool no_frames = false, no_transcript = false, no_bistream = false, sum_pool = false, no_sweeps = false;
  std::string format = "json";

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file (field names as in config.json)");
    app->add_option("--manifest", manifest, "dataset manifest.json");
    app->add_option("--out", output_dir, "output directory");
    app->add_option("--seed", seed, "RNG seed (overrides M2SM_SEED and the config file)");
    app->add_option("--attention", attention, "none|concat_product|bilinear|bihop");
    app->add_option("--fusion", fusion, "early|tensor|late|late_plus");
    app->add_option("--pairing", pairing, "late+ penalty pairing: cross|self");
    app->add_option("--reverse-route", reverse_route, "frame-side bi-hop route: auto|direct");
    app->add_option("--beta", beta, "late+ smoothing coefficient");
    app->add_option("--alpha-ts", alpha_ts, "text loss weight");
    app->add_option("--alpha-vs", alpha_vs, "video loss weight");
    app->add_option("--lr", lr, "Adagrad learning rate");
    app->add_option("--epochs", epochs, "maximum epochs");
    app->add_option("--patience", patience, "early-stopping patience in epochs");
    app->add_option("--embed-dim", embed_dim);
    app->add_option("--hidden", hidden, "LSTM hidden size per direction");
    app->add_option("--attn-dim", attn_dim);
    app->add_option("--fusion-hidden", fusion_hidden);
    app->add_option("--feature-dim", feature_dim, "frame feature dimension (default: from data)");
    app->add_option("--init-scale", init_scale);
    app->add_option("--fps-group", fps_group, "keep one frame per group of this many");
    app->add_option("--min-raw-frames", min_raw_frames);
    app->add_option("--k-sentences", k_sentences);
    app->add_option("--k-frames", k_frames);
    app->add_option("--label-cap", label_cap);
    app->add_option("--split", eval_split, "split to evaluate: train|val|test");
    app->add_option("--checkpoint", checkpoint, "checkpoint directory");
    app->add_option("--ablation-epochs", ablation_epochs);
    app->add_option("--jobs", jobs, "parallel ablation workers");
    app->add_flag("--no-frames", no_frames, "text only");
    app->add_flag("--no-transcript", no_transcript, "disable the transcript bridge");
    app->add_flag("--no-bistream", no_bistream, "disable the frame-selection loss");
    app->add_flag("--sum-pool", sum_pool, "sum word states instead of averaging");
    app->add_flag("--no-sweeps", no_sweeps, "skip the ratio and beta sweeps in ablate");
    app->add_option("--format", format, "report format: json|csv (csv also writes JSON)")
        ->check(CLI::IsMember({"json", "csv"}));
  }

  RunConfig resolve(const RunConfig& base = {}) const {
    RunConfig c = base;
    if (!config_file.empty()) m2sm::apply_config_file(c, config_file);
    m2sm::apply_seed_env(c);
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(c.manifest, manifest);
    set(c.output_dir, output_dir);
    set(c.checkpoint, checkpoint);
    set(c.attention, attention);
    set(c.fusion, fusion);
    set(c.pairing, pairing);
    set(c.reverse_route, reverse_route);
    set(c.eval_split, eval_split);
    set(c.embed_dim, embed_dim);
    set(c.hidden, hidden);
    set(c.attn_dim, attn_dim);
    set(c.fusion_hidden, fusion_hidden);
    if (feature_dim) c.feature_dim = *feature_dim;
    set(c.epochs, epochs);
    set(c.patience, patience);
    set(c.k_sentences, k_sentences);
    set(c.k_frames, k_frames);
    set(c.fps_group, fps_group);
    set(c.min_raw_frames, min_raw_frames);
    set(c.label_cap, label_cap);
    set(c.ablation_epochs, ablation_epochs);
    set(c.jobs, jobs);
    set(c.beta, beta);
    set(c.alpha_ts, alpha_ts);
    set(c.alpha_vs, alpha_vs);
    set(c.lr, lr);
    set(c.init_scale, init_scale);
    set(c.seed, seed);
    if (no_frames) c.use_frames = false;
    if (no_transcript) c.use_transcript = false;
    if (no_bistream) c.use_bistream = false;
    if (sum_pool) c.sum_pool = true;
    if (no_sweeps) c.ablation_sweeps = false;
    return c;
  }
};

struct SynthFlags {
  std::string out;
  std::string config_file;
  std::optional<std::uint64_t> seed;
  bool force = false;
  m2sm::SynthConfig cfg;

  void attach(CLI::App* app) {
    app->add_option("--out", out, "output directory")->required();
    app->add_option("--config", config_file, "JSON file with generator fields");
    app->add_option("--seed", seed, "RNG seed (overrides M2SM_SEED)");
    app->add_flag("--force", force, "replace an existing output directory");
    app->add_option("--samples", cfg.samples);
    app->add_option("--sentences", cfg.sentences);
    app->add_option("--min-words", cfg.min_words);
    app->add_option("--max-words", cfg.max_words);
    app->add_option("--frames", cfg.frames, "frames per video after subsampling");
    app->add_option("--fps-group", cfg.fps_group);
    app->add_option("--feature-dim", cfg.feature_dim);
    app->add_option("--vocab", cfg.vocab_size);
    app->add_option("--salience", cfg.salience, "fraction of salient sentences/frames, in (0,1)");
    app->add_option("--noise", cfg.noise);
    app->add_option("--transcript-length", cfg.transcript_length);
    app->add_option("--transcript-overlap", cfg.transcript_overlap);
    app->add_option("--ref-images", cfg.ref_images);
  }
};

int report_error(const m2sm::Error& e) {
  std::cerr << nlohmann::json{{"error", std::string(e.code())}, {"message", e.what()}}.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal (article + video) extractive summarization"};
  app.require_subcommand(1);

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with planted salience");
  synth.attach(synth_cmd);

  RunFlags train_flags, eval_flags, ablate_flags, overlap_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_flags.attach(train_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (ROUGE, Cos, label F1)");
  eval_flags.attach(eval_cmd);
  auto* ablate_cmd = app.add_subcommand("ablate", "fusion x attention x training ablation matrix");
  ablate_flags.attach(ablate_cmd);
  auto* overlap_cmd = app.add_subcommand("overlap", "transcript overlap with articles and references");
  overlap_flags.attach(overlap_cmd);

  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check over every attention x fusion pair");
  gc_cmd->add_option("--seed", gc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth_cmd) {
      m2sm::SynthConfig cfg = synth.cfg;
      if (!synth.config_file.empty()) {
        // File values fill in what the flags left at their defaults.
        std::ifstream in(synth.config_file);
        if (!in) throw m2sm::ConfigError("cannot open config file " + synth.config_file);
        nlohmann::json j = nlohmann::json::parse(in);
        nlohmann::json merged = m2sm::SynthConfig{};
        merged.update(j);
        const nlohmann::json flags = synth.cfg;
        const nlohmann::json defaults = m2sm::SynthConfig{};
        for (const auto& [k, v] : flags.items()) {
          if (v != defaults[k]) merged[k] = v;
        }
        cfg = merged.get<m2sm::SynthConfig>();
      }
      RunConfig seed_holder;
      m2sm::apply_seed_env(seed_holder);
      const std::uint64_t seed = synth.seed.value_or(seed_holder.seed);
      const auto m = m2sm::cmd_synth(cfg, seed, synth.out, synth.force);
      std::cout << "wrote " << m.entries.size() << " samples to " << synth.out << '\n';
    } else if (*train_cmd) {
      const RunConfig cfg = train_flags.resolve();
      const auto out = m2sm::cmd_train(cfg, &std::cerr);
      std::cout << nlohmann::json{{"checkpoint", out.checkpoint_dir.generic_string()},
                                  {"metrics", out.metrics_path.generic_string()},
                                  {"epochs", out.state.epoch},
                                  {"best_epoch", out.state.best_epoch},
                                  {"best_val_loss", out.state.best_val},
                                  {"initial_train_ce", out.state.initial_train_ce},
                                  {"stopped_early", out.state.stopped_early}}
                       .dump(2)
                << '\n';
    } else if (*eval_cmd) {
      // Start from the run's config snapshot so dims match the checkpoint.
      RunConfig base;
      const std::filesystem::path ckpt =
          eval_flags.checkpoint ? std::filesystem::path(*eval_flags.checkpoint)
                                : std::filesystem::path(eval_flags.output_dir.value_or(base.output_dir)) / "checkpoint";
      if (eval_flags.config_file.empty() && std::filesystem::exists(ckpt.parent_path() / "config.json")) {
        m2sm::apply_config_file(base, ckpt.parent_path() / "config.json");
      }
      RunConfig cfg = eval_flags.resolve(base);
      cfg.checkpoint = ckpt.string();
      const auto out = m2sm::cmd_eval(cfg, eval_flags.format == "csv");
      for (const auto& w : out.report.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << m2sm::to_json(out.report)["corpus_mean"].dump(2) << '\n';
    } else if (*ablate_cmd) {
      const auto out = m2sm::cmd_ablate(ablate_flags.resolve());
      std::cout << m2sm::format_ablation_table(out.cells);
      std::cout << out.cells.size() - out.failures() << "/" << out.cells.size() << " cells succeeded; report at "
                << out.report_path.generic_string() << '\n';
      if (out.failures() > 0) return 1;
    } else if (*overlap_cmd) {
      const auto rep = m2sm::cmd_overlap(overlap_flags.resolve());
      std::cout << m2sm::format_overlap_table(rep);
    } else if (*gc_cmd) {
      double worst = 0.0;
      for (auto att : {m2sm::AttentionMode::kNone, m2sm::AttentionMode::kConcatProduct, m2sm::AttentionMode::kBilinear,
                       m2sm::AttentionMode::kBiHop}) {
        for (auto fus : {m2sm::FusionMode::kEarly, m2sm::FusionMode::kTensor, m2sm::FusionMode::kLate,
                         m2sm::FusionMode::kLatePlus}) {
          const auto rep = m2sm::gradient_check(m2sm::tiny_model_config(att, fus), gc_seed);
          worst = std::max(worst, rep.max_rel());
          std::cout << m2sm::to_string(att) << " x " << m2sm::to_string(fus) << ": max rel error " << rep.max_rel()
                    << '\n';
        }
      }
      if (worst >= 1e-3) return 1;
    }
  } catch (const m2sm::Error& e) {
    return report_error(e);
  } catch (const nlohmann::json::exception& e) {
    return report_error(m2sm::ConfigError(e.what()));
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "E_INTERNAL"}, {"message", e.what()}}.dump() << '\n';
    return 3;
  }
  return 0;
}
