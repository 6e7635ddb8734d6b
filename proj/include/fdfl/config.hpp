#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdfl/data.hpp"
#include "fdfl/losses.hpp"
#include "fdfl/model.hpp"

namespace fdfl::config {

enum class LossVariant { kSoftmax, kSoftmaxScl, kSoftmaxCenter, kSoftmaxTriplet };

LossVariant loss_variant_from_string(const std::string& s);
std::string to_string(LossVariant v);

struct DataConfig {
  std::string root = "runs/corpus";
  data::SyntheticConfig synth;  // serialized flat inside the "data" section
  int frames_per_real_video = 80;
  int frames_per_fake_video = 20;
};

struct LossConfig {
  LossVariant variant = LossVariant::kSoftmaxScl;
  losses::SclConfig scl;        // m, lambda, eps_dist
  double aux_weight = 0.01;     // center / triplet loss weight
  double triplet_margin = 0.3;
};

struct OptimConfig {
  std::string kind = "adam";  // adam | sgd
  double lr = 2e-4;
  double weight_decay = 1e-5;  // weights only; never norms, biases, center
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // sgd only
  int warmup_steps = 0;   // linear lr warmup, then constant
};

struct RunConfig {
  int epochs = 3;
  int batch_size = 8;
  uint64_t seed = 1;
  int train_image_size = 256;  // images resized to this before both branches
  int eval_every = 0;          // steps between validation evals; 0 = per epoch
  int log_every = 1;           // steps between metrics-history lines
  int max_steps = 0;           // hard step cap; 0 = none
  std::string precision = "f64";  // the only implemented mode
  int ablation_seeds = 3;
  std::vector<double> sweep_lambda = {0.0, 0.001, 0.01, 0.1, 0.5, 1.0};
  std::vector<double> sweep_m = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35};
};

// Whole-experiment description; JSON sections {data, model, loss, optim, run}.
struct TrainConfig {
  DataConfig data;
  model::ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  RunConfig run;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Strict: unknown keys and type mismatches throw ConfigError with the dotted path.
TrainConfig train_config_from_json(const nlohmann::json& j);

// Defaults <- file (optional) <- dotted-key overrides, then validate().
TrainConfig parse_config(const std::string& path,
                         const std::vector<std::string>& overrides);

// Applies "a.b.c=value" onto a config JSON; the key must already exist and the
// value must match the schema type. Bare words become strings, everything that
// parses as JSON keeps its parsed type.
void apply_override(nlohmann::json* cfg, const std::string& assignment);

void save_config(const TrainConfig& cfg, const std::string& path);

}  // namespace fdfl::config
