#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdfl/config.hpp"
#include "fdfl/data.hpp"
#include "fdfl/freq.hpp"
#include "fdfl/metrics.hpp"
#include "fdfl/model.hpp"

namespace fdfl::trainer {

// Adaptive-moment or plain momentum descent over a fixed parameter list.
// Weight decay touches only refs flagged decay (never norms, biases, centers).
class Optimizer {
 public:
  Optimizer(const config::OptimConfig& cfg, std::vector<nn::ParamRef> params);

  void step();
  void zero_grad();
  int64_t steps() const { return t_; }
  double current_lr() const;  // after warmup scaling

 private:
  config::OptimConfig cfg_;
  std::vector<nn::ParamRef> params_;
  std::vector<std::vector<double>> m_, v_;  // adam moments / sgd velocity
  int64_t t_ = 0;
};

// One preprocessed sample: the RGB branch input ([-1,1] CHW planes) and, when
// the frequency branch is active, the normalized DCT tensor in CHW order.
struct Sample {
  std::vector<double> rgb;   // 3 * S * S
  std::vector<double> freq;  // 192 * (S/8) * (S/8), empty when unused
};

// Decodes, resizes and transforms lazily; keeps everything in memory after
// first touch. When FDFL_CACHE_DIR is set, unnormalized frequency tensors are
// persisted as float32 and always round-tripped through that precision so
// results do not depend on cache hits.
class PreprocessedDataset {
 public:
  PreprocessedDataset(data::CorpusManifest manifest, int image_size,
                      const freq::ChannelStats* stats, bool want_freq);

  const Sample& get(int i);
  int size() const { return static_cast<int>(manifest_.records.size()); }
  int image_size() const { return image_size_; }
  const data::CorpusManifest& manifest() const { return manifest_; }

 private:
  data::CorpusManifest manifest_;
  int image_size_;
  const freq::ChannelStats* stats_;
  bool want_freq_;
  std::string cache_dir_;  // from FDFL_CACHE_DIR, may be empty
  std::vector<std::optional<Sample>> cache_;
};

// Streaming pass over a split; feeds the stats accumulator with unnormalized
// tensors. Training must call this on the train split only.
freq::ChannelStats compute_split_stats(const data::CorpusManifest& manifest,
                                       int image_size);

// Everything needed to rebuild and evaluate the model: config, channel stats,
// and every parameter/buffer/center tensor by name.
struct CheckpointRecord {
  config::TrainConfig cfg;
  freq::ChannelStats stats;  // count == 0 when the frequency branch is off
  std::vector<std::pair<std::string, std::vector<double>>> tensors;
  int64_t step = 0;
  nlohmann::json history = nlohmann::json::array();
};

// Directory layout: descriptor.json + blobs/<name>.f64 (raw little-endian
// doubles). Round-trips bit-exactly.
void save_checkpoint(const CheckpointRecord& ckpt, const std::string& dir);
CheckpointRecord load_checkpoint(const std::string& dir);

// Rebuilds the model and loads every named tensor; center tensors are written
// to the vectors passed in (any may be null if the caller does not need them).
std::unique_ptr<model::Model> restore_model(const CheckpointRecord& ckpt,
                                            std::vector<double>* center,
                                            std::vector<double>* center_nat,
                                            std::vector<double>* center_man);

// Packs dataset samples into NCHW batch tensors for both branches; ft is left
// untouched when want_freq is false.
void assemble_batch(PreprocessedDataset& ds, const std::vector<int>& idx,
                    bool want_freq, Tensor* imgs, Tensor* ft);

struct EvalOutput {
  std::vector<metrics::ScoredFrame> frames;
  metrics::MetricsReport frame_level;
  metrics::MetricsReport video_level;
};

EvalOutput evaluate_split(model::Model& model, PreprocessedDataset& ds,
                          int batch_size);
// Checkpoint-driven evaluation over <corpus_root>/<split>.
EvalOutput evaluate_checkpoint(const CheckpointRecord& ckpt,
                               const std::string& corpus_root,
                               const std::string& split);

struct StepLog {
  int64_t step = 0;
  double total = 0.0, ce = 0.0, aux = 0.0;
  double m_nat = 0.0, m_man = 0.0;
  bool hinge_active = false;
};

struct TrainResult {
  CheckpointRecord best;  // highest validation video AUC (initial model included)
  double initial_val_auc = 0.0;
  double best_val_auc = 0.0;
  double final_val_auc = 0.0;
  std::vector<double> step_losses;
  int single_class_batches = 0;  // warning counter under metric losses
  int64_t steps = 0;
};

// Full loop: mixed batches -> both-branch preprocessing -> forward ->
// loss-variant computation -> analytic backward -> optimizer step (centers are
// ordinary parameters). Writes metrics.jsonl and checkpoints under out_dir
// when it is non-empty. Aborts on non-finite loss.
TrainResult train(const config::TrainConfig& cfg, const std::string& out_dir);

struct AblationCell {
  std::string variant;
  double auc = 0.0;        // test-split video AUC, mean over seeds
  double pauc_0_1 = 0.0;   // test-split video pAUC@0.1, mean over seeds
  bool failed = false;
  std::string error;
  std::vector<double> per_seed_auc;
};

// Protocols: losses, fusion, components, sweep_lambda, sweep_m. Cells share
// the seed set {run.seed .. run.seed+ablation_seeds-1}. Failures are recorded
// in the table, not propagated.
std::vector<AblationCell> run_ablation(const std::string& protocol,
                                       const config::TrainConfig& base,
                                       const std::string& out_dir);
void save_ablation_csv(const std::vector<AblationCell>& cells,
                       const std::string& path,
                       const std::string& detail_path = "");

struct EmbeddingExport {
  struct Row {
    std::string video_id, frame_id;
    int label = 0;
    double distance_to_center = 0.0;
    std::vector<double> embedding;
  };
  std::vector<Row> rows;
};

// Seeded sample of n embeddings per class from a split; clamps with a warning
// when fewer are available.
EmbeddingExport export_embeddings(const CheckpointRecord& ckpt,
                                  const std::string& corpus_root,
                                  const std::string& split, int n_per_class);
void save_embeddings_csv(const EmbeddingExport& ex, const std::string& path);

}  // namespace fdfl::trainer
