#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "fdfl/trainer.hpp"

namespace fs = std::filesystem;

namespace fdfl::trainer {

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string path_safe(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return out;
}

struct CellSpec {
  std::string name;
  std::function<void(config::TrainConfig*)> mutate;
};

// Protocol grids mirror the reference row structures: four loss rows, six
// fusion rows, four component rows, and the two hyper-parameter sweeps. The
// loss rows and sweeps run the RGB-only backbone; the fusion rows run with
// the frequency branch on under plain softmax supervision.
std::vector<CellSpec> cells_for(const std::string& protocol,
                                const config::TrainConfig& base) {
  using config::LossVariant;
  using config::TrainConfig;
  std::vector<CellSpec> specs;
  if (protocol == "losses") {
    const std::pair<const char*, LossVariant> rows[] = {
        {"softmax", LossVariant::kSoftmax},
        {"softmax+center", LossVariant::kSoftmaxCenter},
        {"softmax+triplet", LossVariant::kSoftmaxTriplet},
        {"softmax+scl", LossVariant::kSoftmaxScl}};
    for (const auto& [name, variant] : rows)
      specs.push_back({name, [variant](TrainConfig* c) {
                         c->model.use_affgm = false;
                         c->loss.variant = variant;
                       }});
  } else if (protocol == "fusion") {
    struct Row {
      const char* name;
      model::FusionKind kind;
      int kernel, groups;
    };
    const Row rows[] = {{"concatenation", model::FusionKind::kConcat, 0, 0},
                        {"sum", model::FusionKind::kSum, 0, 0},
                        {"conv3x3_group1", model::FusionKind::kConv, 3, 1},
                        {"conv1x1_group1", model::FusionKind::kConv, 1, 1},
                        {"conv3x3_group2", model::FusionKind::kConv, 3, 2},
                        {"conv1x1_group2", model::FusionKind::kConv, 1, 2}};
    for (const Row& r : rows)
      specs.push_back({r.name, [r](TrainConfig* c) {
                         c->model.use_affgm = true;
                         c->loss.variant = LossVariant::kSoftmax;
                         c->model.fusion.kind = r.kind;
                         if (r.kind == model::FusionKind::kConv) {
                           c->model.fusion.kernel = r.kernel;
                           c->model.fusion.groups = r.groups;
                         }
                         // sum needs matching branch widths
                         if (r.kind == model::FusionKind::kSum)
                           c->model.afimb.out_channels =
                               c->model.backbone_widths[1];
                       }});
  } else if (protocol == "components") {
    const std::tuple<const char*, bool, LossVariant> rows[] = {
        {"baseline", false, LossVariant::kSoftmax},
        {"baseline+scl", false, LossVariant::kSoftmaxScl},
        {"baseline+affgm", true, LossVariant::kSoftmax},
        {"baseline+affgm+scl", true, LossVariant::kSoftmaxScl}};
    for (const auto& [name, affgm, variant] : rows)
      specs.push_back({name, [affgm, variant](TrainConfig* c) {
                         c->model.use_affgm = affgm;
                         c->loss.variant = variant;
                       }});
  } else if (protocol == "sweep_lambda") {
    for (double v : base.run.sweep_lambda)
      specs.push_back({"lambda=" + fmt_g(v), [v](TrainConfig* c) {
                         c->model.use_affgm = false;
                         c->loss.variant = LossVariant::kSoftmaxScl;
                         c->loss.scl.m = 0.1;
                         c->loss.scl.lambda = v;
                       }});
  } else if (protocol == "sweep_m") {
    for (double v : base.run.sweep_m)
      specs.push_back({"m=" + fmt_g(v), [v](TrainConfig* c) {
                         c->model.use_affgm = false;
                         c->loss.variant = LossVariant::kSoftmaxScl;
                         c->loss.scl.lambda = 0.5;
                         c->loss.scl.m = v;
                       }});
  } else {
    throw ConfigError("unknown ablation protocol: " + protocol +
                      " (expected losses, fusion, components, sweep_lambda, "
                      "sweep_m)");
  }
  return specs;
}

}  // namespace

std::vector<AblationCell> run_ablation(const std::string& protocol,
                                       const config::TrainConfig& base,
                                       const std::string& out_dir) {
  const std::vector<CellSpec> specs = cells_for(protocol, base);
  std::vector<AblationCell> cells;
  for (const CellSpec& spec : specs) {
    AblationCell cell;
    cell.variant = spec.name;
    double auc_sum = 0.0, pauc_sum = 0.0;
    for (int s = 0; s < base.run.ablation_seeds && !cell.failed; ++s) {
      config::TrainConfig cfg = base;
      spec.mutate(&cfg);
      cfg.run.seed = base.run.seed + static_cast<uint64_t>(s);
      std::string cell_dir;
      if (!out_dir.empty())
        cell_dir = (fs::path(out_dir) / "cells" /
                    (path_safe(spec.name) + "_s" + std::to_string(s)))
                       .string();
      try {
        TrainResult r = train(cfg, cell_dir);
        EvalOutput ev = evaluate_checkpoint(r.best, cfg.data.root, "test");
        cell.per_seed_auc.push_back(ev.video_level.auc);
        auc_sum += ev.video_level.auc;
        pauc_sum += ev.video_level.pauc_at_0_1;
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    }
    if (!cell.failed) {
      cell.auc = auc_sum / base.run.ablation_seeds;
      cell.pauc_0_1 = pauc_sum / base.run.ablation_seeds;
    } else {
      cell.auc = cell.pauc_0_1 = std::nan("");
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

void save_ablation_csv(const std::vector<AblationCell>& cells,
                       const std::string& path,
                       const std::string& detail_path) {
  std::ofstream f(path);
  check(f.good(), "cannot write ablation table to " + path);
  f << "variant,auc,pauc_0.1\n";
  char buf[128];
  for (const AblationCell& c : cells) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", c.variant.c_str(), c.auc,
                  c.pauc_0_1);
    f << buf;
  }
  if (detail_path.empty()) return;
  std::ofstream d(detail_path);
  check(d.good(), "cannot write ablation details to " + detail_path);
  d << "variant,seed,auc,status\n";
  for (const AblationCell& c : cells) {
    if (c.failed) {
      std::string msg = c.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      d << c.variant << ",-,nan,error:" << msg << "\n";
      continue;
    }
    for (size_t s = 0; s < c.per_seed_auc.size(); ++s) {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,ok\n", c.variant.c_str(), s,
                    c.per_seed_auc[s]);
      d << buf;
    }
  }
}

EmbeddingExport export_embeddings(const CheckpointRecord& ckpt,
                                  const std::string& corpus_root,
                                  const std::string& split, int n_per_class) {
  check(n_per_class >= 1, "n_per_class must be >= 1");
  std::vector<double> center;
  auto model = restore_model(ckpt, &center, nullptr, nullptr);

  const fs::path mpath = fs::path(corpus_root) / split / "manifest.jsonl";
  data::CorpusManifest manifest =
      fs::exists(mpath)
          ? data::load_manifest(mpath.string())
          : data::build_manifest((fs::path(corpus_root) / split).string(),
                                 split, ckpt.cfg.data.frames_per_real_video,
                                 ckpt.cfg.data.frames_per_fake_video);
  PreprocessedDataset ds(std::move(manifest), ckpt.cfg.run.train_image_size,
                         ckpt.cfg.model.use_affgm ? &ckpt.stats : nullptr,
                         ckpt.cfg.model.use_affgm);

  nn::Rng rng = nn::Rng::stream(ckpt.cfg.run.seed, "export");
  std::vector<int> chosen;
  for (int label = 0; label < 2; ++label) {
    std::vector<int> pool;
    for (int i = 0; i < ds.size(); ++i)
      if (ds.manifest().records[i].label == label) pool.push_back(i);
    if (static_cast<int>(pool.size()) < n_per_class)
      std::fprintf(stderr,
                   "warning: class %d has only %zu samples, requested %d\n",
                   label, pool.size(), n_per_class);
    for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i)
      std::swap(pool[i], pool[rng.uniform_int(0, i)]);
    for (int i = 0; i < std::min<int>(n_per_class, pool.size()); ++i)
      chosen.push_back(pool[i]);
  }

  EmbeddingExport ex;
  const int batch = ckpt.cfg.run.batch_size;
  const bool want_freq = ckpt.cfg.model.use_affgm;
  for (size_t start = 0; start < chosen.size();
       start += static_cast<size_t>(batch)) {
    std::vector<int> idx(chosen.begin() + start,
                         chosen.begin() +
                             std::min(chosen.size(), start + batch));
    Tensor imgs, ft;
    assemble_batch(ds, idx, want_freq, &imgs, &ft);
    model::ModelOutput mo = model->forward(imgs, ft, false);
    for (size_t b = 0; b < idx.size(); ++b) {
      const auto& rec = ds.manifest().records[idx[b]];
      EmbeddingExport::Row row;
      row.video_id = rec.video_id;
      row.frame_id = rec.frame_id;
      row.label = rec.label;
      const double* e = mo.embeddings.row(static_cast<int>(b));
      row.embedding.assign(e, e + mo.embeddings.cols());
      double d2 = 0.0;
      for (size_t d = 0; d < row.embedding.size(); ++d) {
        const double diff = row.embedding[d] - center[d];
        d2 += diff * diff;
      }
      row.distance_to_center = std::sqrt(d2);
      ex.rows.push_back(std::move(row));
    }
  }
  return ex;
}

void save_embeddings_csv(const EmbeddingExport& ex, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot write embeddings to " + path);
  check(!ex.rows.empty(), "nothing to export");
  f << "video_id,frame_id,label,distance_to_center";
  for (size_t d = 0; d < ex.rows[0].embedding.size(); ++d) f << ",e" << d;
  f << "\n";
  char buf[40];
  for (const auto& r : ex.rows) {
    f << r.video_id << "," << r.frame_id << "," << r.label;
    std::snprintf(buf, sizeof(buf), ",%.10g", r.distance_to_center);
    f << buf;
    for (double v : r.embedding) {
      std::snprintf(buf, sizeof(buf), ",%.10g", v);
      f << buf;
    }
    f << "\n";
  }
}

}  // namespace fdfl::trainer
