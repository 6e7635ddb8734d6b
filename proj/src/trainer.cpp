#include "fdfl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "fdfl/imageio.hpp"
#include "fdfl/losses.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace fdfl::trainer {

// --- optimizer --------------------------------------------------------------

Optimizer::Optimizer(const config::OptimConfig& cfg,
                     std::vector<nn::ParamRef> params)
    : cfg_(cfg), params_(std::move(params)) {
  check(cfg_.kind == "adam" || cfg_.kind == "sgd", "bad optimizer kind");
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    check(params_[i].value && params_[i].grad,
          "optimizer needs value and grad for " + params_[i].name);
    m_[i].assign(params_[i].value->size(), 0.0);
    if (cfg_.kind == "adam") v_[i].assign(params_[i].value->size(), 0.0);
  }
}

double Optimizer::current_lr() const {
  if (cfg_.warmup_steps <= 0) return cfg_.lr;
  return cfg_.lr * std::min(1.0, static_cast<double>(t_) /
                                     static_cast<double>(cfg_.warmup_steps));
}

void Optimizer::step() {
  ++t_;
  const double lr = current_lr();
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& val = *params_[i].value;
    const auto& g = *params_[i].grad;
    const double wd = params_[i].decay ? cfg_.weight_decay : 0.0;
    if (cfg_.kind == "adam") {
      // decoupled weight decay so the moment estimates track the loss
      // gradient only
      for (size_t j = 0; j < val.size(); ++j) {
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mh = m_[i][j] / bc1;
        const double vh = v_[i][j] / bc2;
        val[j] -= lr * (mh / (std::sqrt(vh) + cfg_.eps) + wd * val[j]);
      }
    } else {
      for (size_t j = 0; j < val.size(); ++j) {
        m_[i][j] = cfg_.momentum * m_[i][j] + g[j] + wd * val[j];
        val[j] -= lr * m_[i][j];
      }
    }
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_)
    std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

// --- preprocessing ----------------------------------------------------------

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

std::string cache_key(const std::string& path, int image_size) {
  std::string probe = path + "|" + std::to_string(image_size);
  std::error_code ec;
  const auto sz = fs::file_size(path, ec);
  if (!ec) probe += "|" + std::to_string(sz);
  const auto mt = fs::last_write_time(path, ec);
  if (!ec)
    probe += "|" + std::to_string(mt.time_since_epoch().count());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(probe)));
  return buf;
}

void quantize_f32(freq::FrequencyTensor* t) {
  for (auto& c : t->coeffs) c = static_cast<double>(static_cast<float>(c));
}

freq::ImageRGB load_resized(const std::string& path, int image_size) {
  freq::ImageRGB img = io::load_image(path);
  if (img.height != image_size || img.width != image_size)
    img = io::resize_bilinear(img, image_size, image_size);
  return img;
}

// Unnormalized frequency tensor, via the float32 disk cache when enabled.
// Tensors are quantized to float32 whether or not the cache is active, so
// cached and uncached runs agree bit-for-bit.
freq::FrequencyTensor freq_for(const std::string& path, int image_size,
                               const std::string& cache_dir,
                               const freq::ImageRGB* decoded) {
  std::string file;
  if (!cache_dir.empty()) {
    file = (fs::path(cache_dir) / (cache_key(path, image_size) + ".f32")).string();
    freq::FrequencyTensor cached;
    if (freq::load_tensor_cache(file, &cached) && !cached.normalized)
      return cached;
  }
  freq::FrequencyTensor t =
      decoded ? freq::preprocess_image(*decoded)
              : freq::preprocess_image(load_resized(path, image_size));
  quantize_f32(&t);
  if (!file.empty()) {
    fs::create_directories(cache_dir);
    freq::save_tensor_cache(t, file);
  }
  return t;
}

}  // namespace

PreprocessedDataset::PreprocessedDataset(data::CorpusManifest manifest,
                                         int image_size,
                                         const freq::ChannelStats* stats,
                                         bool want_freq)
    : manifest_(std::move(manifest)), image_size_(image_size), stats_(stats),
      want_freq_(want_freq) {
  check(image_size_ >= 16 && image_size_ % 8 == 0,
        "dataset image size must be a multiple of 8");
  check(!want_freq_ || stats_ != nullptr,
        "frequency branch requires channel stats");
  if (const char* env = std::getenv("FDFL_CACHE_DIR"); env && *env)
    cache_dir_ = env;
  cache_.resize(manifest_.records.size());
}

const Sample& PreprocessedDataset::get(int i) {
  check(i >= 0 && i < size(), "dataset index out of range");
  if (cache_[i]) return *cache_[i];

  const auto& rec = manifest_.records[i];
  freq::ImageRGB img = load_resized(rec.path, image_size_);

  Sample s;
  const int sz = image_size_;
  s.rgb.resize(static_cast<size_t>(3) * sz * sz);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < sz; ++y)
      for (int x = 0; x < sz; ++x)
        s.rgb[(static_cast<size_t>(c) * sz + y) * sz + x] =
            img.at(y, x, c) / 127.5 - 1.0;

  if (want_freq_) {
    freq::FrequencyTensor t = freq_for(rec.path, sz, cache_dir_, &img);
    t = freq::normalize(t, *stats_);
    const int r = t.rows;
    s.freq.resize(static_cast<size_t>(freq::kChannels) * r * r);
    for (int c = 0; c < freq::kChannels; ++c)
      for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x)
          s.freq[(static_cast<size_t>(c) * r + y) * r + x] = t.at(y, x, c);
  }
  cache_[i] = std::move(s);
  return *cache_[i];
}

freq::ChannelStats compute_split_stats(const data::CorpusManifest& manifest,
                                       int image_size) {
  std::string cache_dir;
  if (const char* env = std::getenv("FDFL_CACHE_DIR"); env && *env)
    cache_dir = env;
  freq::StatsAccumulator acc;
  for (const auto& rec : manifest.records)
    acc.add(freq_for(rec.path, image_size, cache_dir, nullptr));
  return acc.finalize();
}

// --- checkpoints ------------------------------------------------------------

namespace {

std::string blob_name(size_t index, const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu_", index);
  return buf + s + ".f64";
}

void write_blob(const std::string& path, const std::vector<double>& v) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), "cannot write blob " + path);
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  check(f.good(), "short write to " + path);
}

std::vector<double> read_blob(const std::string& path, size_t n) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot read blob " + path);
  std::vector<double> v(n);
  f.read(reinterpret_cast<char*>(v.data()),
         static_cast<std::streamsize>(n * sizeof(double)));
  check(static_cast<size_t>(f.gcount()) == n * sizeof(double),
        "blob truncated: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const CheckpointRecord& ckpt, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "blobs");
  json desc;
  desc["config"] = config::to_json(ckpt.cfg);
  desc["step"] = ckpt.step;
  desc["history"] = ckpt.history;
  if (ckpt.stats.count > 0)
    desc["stats"] = {{"mean", ckpt.stats.mean},
                     {"std", ckpt.stats.std},
                     {"count", ckpt.stats.count},
                     {"layout", "plane_major_uv"}};
  else
    desc["stats"] = nullptr;
  json tensors = json::array();
  for (size_t i = 0; i < ckpt.tensors.size(); ++i) {
    const auto& [name, v] = ckpt.tensors[i];
    const std::string file = blob_name(i, name);
    write_blob((fs::path(dir) / "blobs" / file).string(), v);
    tensors.push_back({{"name", name}, {"file", file}, {"size", v.size()}});
  }
  desc["tensors"] = tensors;
  std::ofstream f((fs::path(dir) / "descriptor.json").string());
  check(f.good(), "cannot write checkpoint descriptor in " + dir);
  f << desc.dump(2) << "\n";
}

CheckpointRecord load_checkpoint(const std::string& dir) {
  std::ifstream f((fs::path(dir) / "descriptor.json").string());
  check(f.good(), "not a checkpoint directory: " + dir);
  json desc;
  f >> desc;

  CheckpointRecord ckpt;
  ckpt.cfg = config::train_config_from_json(desc.at("config"));
  ckpt.step = desc.at("step").get<int64_t>();
  ckpt.history = desc.value("history", json::array());
  if (!desc.at("stats").is_null()) {
    const json& s = desc.at("stats");
    ckpt.stats.mean = s.at("mean").get<std::vector<double>>();
    ckpt.stats.std = s.at("std").get<std::vector<double>>();
    ckpt.stats.count = s.at("count").get<int64_t>();
  }
  for (const auto& t : desc.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const size_t n = t.at("size").get<size_t>();
    ckpt.tensors.emplace_back(
        name, read_blob((fs::path(dir) / "blobs" /
                         t.at("file").get<std::string>()).string(), n));
  }
  return ckpt;
}

std::unique_ptr<model::Model> restore_model(const CheckpointRecord& ckpt,
                                            std::vector<double>* center,
                                            std::vector<double>* center_nat,
                                            std::vector<double>* center_man) {
  std::map<std::string, const std::vector<double>*> by_name;
  for (const auto& [name, v] : ckpt.tensors) by_name[name] = &v;

  auto model = std::make_unique<model::Model>(ckpt.cfg.model);
  model->init(ckpt.cfg.run.seed);
  auto load_into = [&](const nn::ParamRef& ref) {
    auto it = by_name.find(ref.name);
    check(it != by_name.end(), "checkpoint is missing tensor " + ref.name);
    check(it->second->size() == ref.value->size(),
          "checkpoint tensor " + ref.name + " has wrong size");
    *ref.value = *it->second;
  };
  for (const auto& p : model->params()) load_into(p);
  for (const auto& b : model->buffers()) load_into(b);

  auto copy_center = [&](const char* name, std::vector<double>* dst) {
    if (!dst) return;
    auto it = by_name.find(name);
    check(it != by_name.end(), std::string("checkpoint is missing ") + name);
    *dst = *it->second;
  };
  copy_center("scl/center", center);
  copy_center("center_loss/nat", center_nat);
  copy_center("center_loss/man", center_man);
  return model;
}

// --- evaluation -------------------------------------------------------------

void assemble_batch(PreprocessedDataset& ds, const std::vector<int>& idx,
                    bool want_freq, Tensor* imgs, Tensor* ft) {
  const int B = static_cast<int>(idx.size());
  const int sz = ds.image_size();
  *imgs = Tensor(B, 3, sz, sz);
  if (want_freq) *ft = Tensor(B, freq::kChannels, sz / 8, sz / 8);
  for (int b = 0; b < B; ++b) {
    const Sample& s = ds.get(idx[b]);
    std::memcpy(imgs->plane(b, 0), s.rgb.data(), s.rgb.size() * sizeof(double));
    if (want_freq)
      std::memcpy(ft->plane(b, 0), s.freq.data(),
                  s.freq.size() * sizeof(double));
  }
}

namespace {

double prob_class1(const double* logits) {
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
  return e1 / (e0 + e1);
}

}  // namespace

EvalOutput evaluate_split(model::Model& model, PreprocessedDataset& ds,
                          int batch_size) {
  check(batch_size >= 1, "batch_size must be >= 1");
  const bool want_freq = model.config().use_affgm;
  EvalOutput out;
  for (int start = 0; start < ds.size(); start += batch_size) {
    std::vector<int> idx;
    for (int i = start; i < std::min(ds.size(), start + batch_size); ++i)
      idx.push_back(i);
    Tensor imgs, ft;
    assemble_batch(ds, idx, want_freq, &imgs, &ft);
    model::ModelOutput mo = model.forward(imgs, ft, false);
    for (size_t b = 0; b < idx.size(); ++b) {
      const auto& rec = ds.manifest().records[idx[b]];
      out.frames.push_back({rec.video_id, rec.frame_id,
                            prob_class1(mo.logits.row(static_cast<int>(b))),
                            rec.label});
    }
  }
  out.frame_level = metrics::frame_report(out.frames);
  out.video_level = metrics::video_report(out.frames);
  return out;
}

namespace {

data::CorpusManifest load_split(const std::string& root,
                                const std::string& split,
                                const config::DataConfig& dc) {
  const fs::path mpath = fs::path(root) / split / "manifest.jsonl";
  if (fs::exists(mpath)) {
    data::CorpusManifest m = data::load_manifest(mpath.string());
    m.split = split;
    return m;
  }
  return data::build_manifest((fs::path(root) / split).string(), split,
                              dc.frames_per_real_video,
                              dc.frames_per_fake_video);
}

}  // namespace

EvalOutput evaluate_checkpoint(const CheckpointRecord& ckpt,
                               const std::string& corpus_root,
                               const std::string& split) {
  if (ckpt.cfg.model.use_affgm)
    check(ckpt.stats.count > 0,
          "checkpoint has no channel stats but the frequency branch is on");
  auto model = restore_model(ckpt, nullptr, nullptr, nullptr);
  data::CorpusManifest m = load_split(corpus_root, split, ckpt.cfg.data);
  PreprocessedDataset ds(std::move(m), ckpt.cfg.run.train_image_size,
                         ckpt.cfg.model.use_affgm ? &ckpt.stats : nullptr,
                         ckpt.cfg.model.use_affgm);
  return evaluate_split(*model, ds, ckpt.cfg.run.batch_size);
}

// --- training loop ----------------------------------------------------------

namespace {

void scale_into(const Mat& src, double scale, Mat* dst) {
  *dst = Mat(src.rows(), src.cols());
  for (int i = 0; i < src.rows(); ++i)
    for (int j = 0; j < src.cols(); ++j)
      dst->at(i, j) = scale * src.at(i, j);
}

}  // namespace

TrainResult train(const config::TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const bool affgm = cfg.model.use_affgm;
  const int S = cfg.run.train_image_size;
  if (affgm)
    check(S % 16 == 0,
          "train_image_size must be a multiple of 16 when the frequency "
          "branch is on");

  data::CorpusManifest train_m = load_split(cfg.data.root, "train", cfg.data);
  data::CorpusManifest val_m = load_split(cfg.data.root, "val", cfg.data);

  freq::ChannelStats stats;
  if (affgm) stats = compute_split_stats(train_m, S);
  PreprocessedDataset train_ds(train_m, S, affgm ? &stats : nullptr, affgm);
  PreprocessedDataset val_ds(std::move(val_m), S, affgm ? &stats : nullptr,
                             affgm);

  model::Model model(cfg.model);
  model.init(cfg.run.seed);

  // Centers are ordinary parameters sharing the optimizer, never decayed.
  // All three are always allocated from the same stream so the loss-variant
  // choice cannot shift any other stream's draws.
  const int D = cfg.model.embedding_dim;
  nn::Rng crng = nn::Rng::stream(cfg.run.seed, "center");
  std::vector<double> center(D), cnat(D), cman(D);
  std::vector<double> gcenter(D, 0.0), gcnat(D, 0.0), gcman(D, 0.0);
  const double cscale = 1.0 / std::sqrt(static_cast<double>(D));
  for (auto& x : center) x = crng.normal() * cscale;
  for (auto& x : cnat) x = crng.normal() * cscale;
  for (auto& x : cman) x = crng.normal() * cscale;

  std::vector<nn::ParamRef> params = model.params();
  params.push_back({"scl/center", &center, &gcenter, false});
  params.push_back({"center_loss/nat", &cnat, &gcnat, false});
  params.push_back({"center_loss/man", &cman, &gcman, false});
  Optimizer opt(cfg.optim, params);

  data::MixedBatchSampler sampler(train_ds.manifest(), cfg.run.batch_size,
                                  cfg.run.seed);

  std::ofstream log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    config::save_config(cfg, (fs::path(out_dir) / "config.json").string());
    log.open((fs::path(out_dir) / "metrics.jsonl").string());
    check(log.good(), "cannot open metrics log in " + out_dir);
  }

  json history = json::array();
  auto snapshot = [&](int64_t step) {
    CheckpointRecord c;
    c.cfg = cfg;
    c.stats = stats;
    c.step = step;
    c.history = history;
    for (const auto& p : model.params()) c.tensors.emplace_back(p.name, *p.value);
    for (const auto& b : model.buffers())
      c.tensors.emplace_back(b.name, *b.value);
    c.tensors.emplace_back("scl/center", center);
    c.tensors.emplace_back("center_loss/nat", cnat);
    c.tensors.emplace_back("center_loss/man", cman);
    return c;
  };

  TrainResult res;
  const auto t0 = std::chrono::steady_clock::now();
  auto run_eval = [&](int64_t step) {
    EvalOutput ev = evaluate_split(model, val_ds, cfg.run.batch_size);
    history.push_back({{"step", step},
                       {"val_frame_auc", ev.frame_level.auc},
                       {"val_video_auc", ev.video_level.auc},
                       {"val_video_pauc_0.1", ev.video_level.pauc_at_0_1}});
    res.final_val_auc = ev.video_level.auc;
    if (ev.video_level.auc > res.best_val_auc || res.best.tensors.empty()) {
      res.best_val_auc = ev.video_level.auc;
      res.best = snapshot(step);
    }
    if (log.is_open()) {
      log << history.back().dump() << "\n";
      log.flush();
    }
    return ev.video_level.auc;
  };

  res.best_val_auc = -1.0;
  res.initial_val_auc = run_eval(0);

  int64_t step = 0;
  int64_t last_eval_step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.run.epochs && !stop; ++epoch) {
    for (const auto& batch_idx : sampler.next_epoch()) {
      ++step;
      const int B = static_cast<int>(batch_idx.size());
      Tensor imgs, ft;
      assemble_batch(train_ds, batch_idx, affgm, &imgs, &ft);
      std::vector<int> labels(B);
      for (int b = 0; b < B; ++b)
        labels[b] = train_ds.manifest().records[batch_idx[b]].label;

      model::ModelOutput mo = model.forward(imgs, ft, true);
      const auto finite = [](const Mat& m) {
        for (int64_t i = 0; i < m.size(); ++i)
          if (!std::isfinite(m.data()[i])) return false;
        return true;
      };
      if (!finite(mo.logits) || !finite(mo.embeddings))
        throw std::runtime_error("training diverged at step " +
                                 std::to_string(step) +
                                 ": non-finite model output");
      losses::EmbeddingBatch eb{mo.embeddings, labels};

      StepLog sl;
      sl.step = step;
      Mat g_logits;
      Mat g_emb(B, D);
      switch (cfg.loss.variant) {
        case config::LossVariant::kSoftmax: {
          sl.ce = losses::cross_entropy(mo.logits, labels, &g_logits);
          sl.total = sl.ce;
          break;
        }
        case config::LossVariant::kSoftmaxScl: {
          losses::TotalLossResult tl =
              losses::total_loss(mo.logits, eb, center, cfg.loss.scl);
          sl.total = tl.total;
          sl.ce = tl.ce;
          sl.aux = tl.scl.loss;
          sl.m_nat = tl.scl.m_nat;
          sl.m_man = tl.scl.m_man;
          sl.hinge_active = tl.scl.active && tl.scl.hinge_arg > 0.0;
          g_logits = tl.grad_logits;
          g_emb = tl.grad_embeddings;
          for (int d = 0; d < D; ++d) gcenter[d] += tl.grad_center[d];
          if (!tl.scl.active) ++res.single_class_batches;
          break;
        }
        case config::LossVariant::kSoftmaxCenter: {
          sl.ce = losses::cross_entropy(mo.logits, labels, &g_logits);
          losses::BaselineLossResult bl = losses::center_loss(eb, cnat, cman);
          sl.aux = bl.loss;
          sl.total = sl.ce + cfg.loss.aux_weight * bl.loss;
          scale_into(bl.grad_embeddings, cfg.loss.aux_weight, &g_emb);
          for (int d = 0; d < D; ++d) {
            gcnat[d] += cfg.loss.aux_weight * bl.grad_center_nat[d];
            gcman[d] += cfg.loss.aux_weight * bl.grad_center_man[d];
          }
          if (bl.degenerate) ++res.single_class_batches;
          break;
        }
        case config::LossVariant::kSoftmaxTriplet: {
          sl.ce = losses::cross_entropy(mo.logits, labels, &g_logits);
          losses::BaselineLossResult bl =
              losses::triplet_loss(eb, cfg.loss.triplet_margin,
                                   cfg.loss.scl.eps_dist);
          sl.aux = bl.loss;
          sl.total = sl.ce + cfg.loss.aux_weight * bl.loss;
          scale_into(bl.grad_embeddings, cfg.loss.aux_weight, &g_emb);
          if (bl.degenerate) ++res.single_class_batches;
          break;
        }
      }

      if (!std::isfinite(sl.total))
        throw std::runtime_error(
            "training diverged at step " + std::to_string(step) +
            ": total=" + std::to_string(sl.total) +
            " ce=" + std::to_string(sl.ce) + " aux=" + std::to_string(sl.aux));

      model.backward(g_logits, g_emb);
      opt.step();
      opt.zero_grad();
      res.step_losses.push_back(sl.total);

      if (log.is_open() && step % cfg.run.log_every == 0) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        json line = {{"step", step},          {"total", sl.total},
                     {"ce", sl.ce},           {"aux", sl.aux},
                     {"m_nat", sl.m_nat},     {"m_man", sl.m_man},
                     {"hinge_active", sl.hinge_active},
                     {"lr", opt.current_lr()}, {"elapsed_ms", ms}};
        log << line.dump() << "\n";
      }

      if (cfg.run.eval_every > 0 && step % cfg.run.eval_every == 0) {
        run_eval(step);
        last_eval_step = step;
      }
      if (cfg.run.max_steps > 0 && step >= cfg.run.max_steps) {
        stop = true;
        break;
      }
    }
    if (!stop && cfg.run.eval_every == 0) {
      run_eval(step);
      last_eval_step = step;
    }
  }
  if (last_eval_step != step) run_eval(step);
  res.steps = step;

  if (!out_dir.empty()) {
    save_checkpoint(res.best, (fs::path(out_dir) / "best").string());
    save_checkpoint(snapshot(step), (fs::path(out_dir) / "last").string());
  }
  return res;
}

}  // namespace fdfl::trainer
