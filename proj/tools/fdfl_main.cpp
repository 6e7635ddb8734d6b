#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "fdfl/config.hpp"
#include "fdfl/plot.hpp"
#include "fdfl/trainer.hpp"

namespace fs = std::filesystem;
using namespace fdfl;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  int64_t seed = -1;  // -1 = not given
};

void add_common(CLI::App* cmd, CommonArgs* args, const char* default_out) {
  args->out_dir = default_out;
  cmd->add_option("--config", args->config_path, "experiment config JSON");
  cmd->add_option("--out", args->out_dir, "output directory");
  cmd->add_option("--set", args->overrides,
                  "config override, section.key=value (repeatable)");
  cmd->add_option("--seed", args->seed, "override run.seed");
}

config::TrainConfig resolve(const CommonArgs& args, bool seed_synth = false) {
  std::vector<std::string> overrides = args.overrides;
  if (args.seed >= 0) {
    overrides.push_back("run.seed=" + std::to_string(args.seed));
    if (seed_synth)
      overrides.push_back("data.synth_seed=" + std::to_string(args.seed));
  }
  return config::parse_config(args.config_path, overrides);
}

uint64_t hash_corpus(const std::string& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const char* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
      h = (h ^ static_cast<unsigned char>(p[i])) * 1099511628211ULL;
  };
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, root).string();
    mix(rel.data(), rel.size());
    std::ifstream in(f, std::ios::binary);
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
      mix(buf, static_cast<size_t>(in.gcount()));
  }
  return h;
}

int cmd_synth(const CommonArgs& args) {
  config::TrainConfig cfg = resolve(args, /*seed_synth=*/true);
  const std::string root = args.out_dir.empty() ? cfg.data.root : args.out_dir;
  const auto manifests = data::synth_generate(cfg.data.synth, root);
  for (const auto& m : manifests)
    std::printf("split=%s videos=%zu frames=%zu real=%d fake=%d\n",
                m.split.c_str(),
                static_cast<size_t>(m.n_real + m.n_fake) /
                    cfg.data.synth.frames_per_video,
                m.records.size(), m.n_real, m.n_fake);
  std::printf("corpus_hash=%016llx\n",
              static_cast<unsigned long long>(hash_corpus(root)));
  return 0;
}

int cmd_stats(const CommonArgs& args) {
  config::TrainConfig cfg = resolve(args);
  const fs::path mpath = fs::path(cfg.data.root) / "train" / "manifest.jsonl";
  data::CorpusManifest m =
      fs::exists(mpath)
          ? data::load_manifest(mpath.string())
          : data::build_manifest((fs::path(cfg.data.root) / "train").string(),
                                 "train", cfg.data.frames_per_real_video,
                                 cfg.data.frames_per_fake_video);
  const freq::ChannelStats stats =
      trainer::compute_split_stats(m, cfg.run.train_image_size);
  fs::create_directories(args.out_dir);
  const std::string path = (fs::path(args.out_dir) / "stats.json").string();
  freq::save_stats(stats, path);
  std::printf("stats written to %s (train images=%lld, channels=%d)\n",
              path.c_str(), static_cast<long long>(stats.count),
              freq::kChannels);
  return 0;
}

int cmd_train(const CommonArgs& args) {
  config::TrainConfig cfg = resolve(args);
  trainer::TrainResult r = trainer::train(cfg, args.out_dir);
  std::printf("steps=%lld initial_val_auc=%.4f best_val_auc=%.4f "
              "final_val_auc=%.4f single_class_batches=%d\n",
              static_cast<long long>(r.steps), r.initial_val_auc,
              r.best_val_auc, r.final_val_auc, r.single_class_batches);
  std::printf("checkpoints: %s/best %s/last\n", args.out_dir.c_str(),
              args.out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt_dir,
             const std::string& split) {
  trainer::CheckpointRecord ckpt = trainer::load_checkpoint(ckpt_dir);
  config::TrainConfig cfg = ckpt.cfg;
  if (!args.config_path.empty() || !args.overrides.empty() || args.seed >= 0) {
    cfg = resolve(args);  // allow pointing the checkpoint at another corpus
    ckpt.cfg.data = cfg.data;
  }
  trainer::EvalOutput ev =
      trainer::evaluate_checkpoint(ckpt, ckpt.cfg.data.root, split);
  std::printf("%s\n%s\n", ev.frame_level.to_json().c_str(),
              ev.video_level.to_json().c_str());
  fs::create_directories(args.out_dir);
  metrics::save_scores_csv(
      ev.frames, (fs::path(args.out_dir) / "scores.csv").string());
  std::ofstream fr((fs::path(args.out_dir) / "report_frame.json").string());
  fr << ev.frame_level.to_json() << "\n";
  std::ofstream vr((fs::path(args.out_dir) / "report_video.json").string());
  vr << ev.video_level.to_json() << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& protocol) {
  config::TrainConfig cfg = resolve(args);
  const auto cells = trainer::run_ablation(protocol, cfg, args.out_dir);
  fs::create_directories(args.out_dir);
  const std::string table =
      (fs::path(args.out_dir) / ("ablation_" + protocol + ".csv")).string();
  trainer::save_ablation_csv(
      cells, table,
      (fs::path(args.out_dir) / ("ablation_" + protocol + "_detail.csv"))
          .string());
  std::printf("variant,auc,pauc_0.1\n");
  for (const auto& c : cells) {
    if (c.failed)
      std::printf("%s,nan,nan  (error: %s)\n", c.variant.c_str(),
                  c.error.c_str());
    else
      std::printf("%s,%.6f,%.6f\n", c.variant.c_str(), c.auc, c.pauc_0_1);
  }
  std::printf("table written to %s\n", table.c_str());
  return 0;
}

int cmd_export(const CommonArgs& args, const std::string& ckpt_dir,
               const std::string& split, int n_per_class) {
  trainer::CheckpointRecord ckpt = trainer::load_checkpoint(ckpt_dir);
  if (!args.config_path.empty() || !args.overrides.empty())
    ckpt.cfg.data = resolve(args).data;
  trainer::EmbeddingExport ex = trainer::export_embeddings(
      ckpt, ckpt.cfg.data.root, split, n_per_class);
  fs::create_directories(args.out_dir);
  const std::string path =
      (fs::path(args.out_dir) / "embeddings.csv").string();
  trainer::save_embeddings_csv(ex, path);
  std::printf("exported %zu rows to %s\n", ex.rows.size(), path.c_str());
  return 0;
}

// distance_to_center column of an embeddings CSV, split by label
void load_distances(const std::string& path, std::vector<double>* nat,
                    std::vector<double>* man) {
  std::ifstream f(path);
  check(f.good(), "cannot open export CSV: " + path);
  std::string line;
  check(static_cast<bool>(std::getline(f, line)), "empty export CSV");
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string vid, fid, label, dist;
    std::getline(ss, vid, ',');
    std::getline(ss, fid, ',');
    std::getline(ss, label, ',');
    std::getline(ss, dist, ',');
    (std::stoi(label) == 0 ? nat : man)->push_back(std::stod(dist));
  }
  check(!nat->empty() && !man->empty(),
        "export CSV must contain both classes");
}

int cmd_plot(const CommonArgs& args, const std::string& kind,
             const std::string& scores_csv, const std::string& export_csv,
             const std::string& table_csv, const std::string& split,
             int bins) {
  fs::create_directories(args.out_dir);
  const fs::path out = args.out_dir;
  if (kind == "roc") {
    check(!scores_csv.empty(), "--scores is required for --kind roc");
    const auto frames = metrics::load_scores_csv(scores_csv);
    std::vector<double> fs_, vs;
    std::vector<int> fl, vl;
    for (const auto& f : frames) {
      fs_.push_back(f.score);
      fl.push_back(f.label);
    }
    metrics::video_aggregate(frames, &vs, &vl);
    plot::roc_plot(fs_, fl, 0.1, (out / "roc_frame.png").string(),
                   (out / "roc_frame.csv").string());
    plot::roc_plot(vs, vl, 0.1, (out / "roc_video.png").string(),
                   (out / "roc_video.csv").string());
    std::printf("wrote roc_frame.{png,csv} roc_video.{png,csv} in %s\n",
                args.out_dir.c_str());
  } else if (kind == "hist") {
    check(!export_csv.empty(), "--export is required for --kind hist");
    std::vector<double> nat, man;
    load_distances(export_csv, &nat, &man);
    plot::histogram_plot(nat, man, bins, (out / "hist_distance.png").string(),
                         (out / "hist_distance.csv").string());
    std::printf("wrote hist_distance.{png,csv} in %s\n", args.out_dir.c_str());
  } else if (kind == "energy") {
    config::TrainConfig cfg = resolve(args);
    const fs::path mpath =
        fs::path(cfg.data.root) / split / "manifest.jsonl";
    data::CorpusManifest m =
        fs::exists(mpath)
            ? data::load_manifest(mpath.string())
            : data::build_manifest((fs::path(cfg.data.root) / split).string(),
                                   split, cfg.data.frames_per_real_video,
                                   cfg.data.frames_per_fake_video);
    plot::band_energy_plot(plot::band_energy(m, cfg.run.train_image_size),
                           (out / "band_energy.png").string(),
                           (out / "band_energy.csv").string());
    std::printf("wrote band_energy.{png,csv} in %s\n", args.out_dir.c_str());
  } else if (kind == "sweep") {
    check(!table_csv.empty(), "--table is required for --kind sweep");
    std::ifstream f(table_csv);
    check(f.good(), "cannot open table CSV: " + table_csv);
    std::string line;
    check(static_cast<bool>(std::getline(f, line)), "empty table CSV");
    std::vector<double> xs, ys;
    std::string xlabel = "value";
    while (std::getline(f, line)) {
      std::stringstream ss(line);
      std::string variant, auc;
      std::getline(ss, variant, ',');
      std::getline(ss, auc, ',');
      const size_t eq = variant.find('=');
      check(eq != std::string::npos,
            "sweep table rows must be named key=value: " + variant);
      xlabel = variant.substr(0, eq);
      xs.push_back(std::stod(variant.substr(eq + 1)));
      ys.push_back(std::stod(auc));
    }
    plot::sweep_plot(xs, ys, xlabel, (out / "sweep.png").string(),
                     (out / "sweep.csv").string());
    std::printf("wrote sweep.{png,csv} in %s\n", args.out_dir.c_str());
  } else {
    throw ConfigError("unknown plot kind: " + kind +
                      " (expected roc, hist, energy, sweep)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fdfl: face-forgery detection with frequency features and a "
      "single-center embedding loss"};
  app.require_subcommand(1);

  CommonArgs synth_a, stats_a, train_a, eval_a, ablate_a, export_a, plot_a;
  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  add_common(synth, &synth_a, "");
  auto* stats = app.add_subcommand("stats", "channel stats from the train split");
  add_common(stats, &stats_a, "runs/stats");
  auto* train = app.add_subcommand("train", "train one model");
  add_common(train, &train_a, "runs/train");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(eval, &eval_a, "runs/eval");
  std::string eval_ckpt, eval_split = "test";
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory")
      ->required();
  eval->add_option("--split", eval_split, "corpus split");
  auto* ablate = app.add_subcommand("ablate", "run an ablation protocol");
  add_common(ablate, &ablate_a, "runs/ablate");
  std::string protocol;
  ablate
      ->add_option("--protocol", protocol,
                   "losses | fusion | components | sweep_lambda | sweep_m")
      ->required();
  auto* exp = app.add_subcommand("export", "export embeddings to CSV");
  add_common(exp, &export_a, "runs/export");
  std::string export_ckpt, export_split = "val";
  int export_n = 5000;
  exp->add_option("--checkpoint", export_ckpt, "checkpoint directory")
      ->required();
  exp->add_option("--split", export_split, "corpus split");
  exp->add_option("--n", export_n, "samples per class");
  auto* plotc = app.add_subcommand("plot", "render plots and their CSVs");
  add_common(plotc, &plot_a, "runs/plot");
  std::string plot_kind, plot_scores, plot_export, plot_table,
      plot_split = "train";
  int plot_bins = 24;
  plotc->add_option("--kind", plot_kind, "roc | hist | energy | sweep")
      ->required();
  plotc->add_option("--scores", plot_scores, "scores CSV (roc)");
  plotc->add_option("--export", plot_export, "embeddings CSV (hist)");
  plotc->add_option("--table", plot_table, "ablation CSV (sweep)");
  plotc->add_option("--split", plot_split, "corpus split (energy)");
  plotc->add_option("--bins", plot_bins, "histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_a);
    if (stats->parsed()) return cmd_stats(stats_a);
    if (train->parsed()) return cmd_train(train_a);
    if (eval->parsed()) return cmd_eval(eval_a, eval_ckpt, eval_split);
    if (ablate->parsed()) return cmd_ablate(ablate_a, protocol);
    if (exp->parsed())
      return cmd_export(export_a, export_ckpt, export_split, export_n);
    if (plotc->parsed())
      return cmd_plot(plot_a, plot_kind, plot_scores, plot_export, plot_table,
                      plot_split, plot_bins);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
