#include "fdfl/config.hpp"

#include <fstream>

using json = nlohmann::json;

namespace fdfl::config {

LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "softmax") return LossVariant::kSoftmax;
  if (s == "softmax+scl") return LossVariant::kSoftmaxScl;
  if (s == "softmax+center") return LossVariant::kSoftmaxCenter;
  if (s == "softmax+triplet") return LossVariant::kSoftmaxTriplet;
  throw ConfigError("unknown loss variant: " + s +
                    " (expected softmax, softmax+scl, softmax+center, "
                    "softmax+triplet)");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kSoftmax: return "softmax";
    case LossVariant::kSoftmaxScl: return "softmax+scl";
    case LossVariant::kSoftmaxCenter: return "softmax+center";
    case LossVariant::kSoftmaxTriplet: return "softmax+triplet";
  }
  throw ConfigError("bad loss variant enum");
}

void TrainConfig::validate() const {
  model.validate();
  const bool metric_variant = loss.variant != LossVariant::kSoftmax;
  check(run.batch_size >= (metric_variant ? 2 : 1),
        "batch_size must be >= 2 for metric-loss variants");
  check(optim.lr > 0.0, "learning rate must be positive");
  check(optim.kind == "adam" || optim.kind == "sgd",
        "optim.kind must be adam or sgd");
  check(optim.weight_decay >= 0.0, "weight_decay must be >= 0");
  check(optim.warmup_steps >= 0, "warmup_steps must be >= 0");
  check(run.epochs >= 1, "epochs must be >= 1");
  check(run.train_image_size >= 16 && run.train_image_size % 8 == 0,
        "train_image_size must be a multiple of 8, >= 16");
  check(run.eval_every >= 0 && run.log_every >= 1 && run.max_steps >= 0,
        "bad run cadence settings");
  check(run.precision == "f64",
        "only 64-bit evaluation paths are implemented (run.precision=f64)");
  check(run.ablation_seeds >= 1, "ablation_seeds must be >= 1");
  check(loss.scl.lambda >= 0.0 && loss.scl.m >= 0.0,
        "loss.lambda and loss.m must be >= 0");
  check(loss.aux_weight >= 0.0 && loss.triplet_margin >= 0.0,
        "aux_weight and triplet_margin must be >= 0");
}

json to_json(const TrainConfig& cfg) {
  json bands = json::array();
  for (auto [u, v] : cfg.data.synth.perturbed_bands)
    bands.push_back(json::array({u, v}));

  json j;
  j["data"] = {
      {"root", cfg.data.root},
      {"image_size", cfg.data.synth.image_size},
      {"n_videos_train", cfg.data.synth.n_videos_train},
      {"n_videos_val", cfg.data.synth.n_videos_val},
      {"n_videos_test", cfg.data.synth.n_videos_test},
      {"frames_per_video", cfg.data.synth.frames_per_video},
      {"perturbed_bands", bands},
      {"amplitude", cfg.data.synth.amplitude},
      {"synth_seed", cfg.data.synth.seed},
      {"jpeg_quality", cfg.data.synth.jpeg_quality},
      {"frames_per_real_video", cfg.data.frames_per_real_video},
      {"frames_per_fake_video", cfg.data.frames_per_fake_video},
  };
  j["model"] = {
      {"backbone", cfg.model.backbone},
      {"backbone_widths", cfg.model.backbone_widths},
      {"use_affgm", cfg.model.use_affgm},
      {"afimb",
       {{"grouped_conv_out", cfg.model.afimb.grouped_conv_out},
        {"mid_channels", cfg.model.afimb.mid_channels},
        {"pool_kernel", cfg.model.afimb.pool_kernel},
        {"pool_stride", cfg.model.afimb.pool_stride},
        {"attention_reduction", cfg.model.afimb.attention_reduction},
        {"out_channels", cfg.model.afimb.out_channels}}},
      {"fusion",
       {{"kind", model::to_string(cfg.model.fusion.kind)},
        {"kernel", cfg.model.fusion.kernel},
        {"groups", cfg.model.fusion.groups}}},
      {"embedding_dim", cfg.model.embedding_dim},
      {"num_classes", cfg.model.num_classes},
  };
  j["loss"] = {
      {"variant", to_string(cfg.loss.variant)},
      {"m", cfg.loss.scl.m},
      {"lambda", cfg.loss.scl.lambda},
      {"eps_dist", cfg.loss.scl.eps_dist},
      {"aux_weight", cfg.loss.aux_weight},
      {"triplet_margin", cfg.loss.triplet_margin},
  };
  j["optim"] = {
      {"kind", cfg.optim.kind},
      {"lr", cfg.optim.lr},
      {"weight_decay", cfg.optim.weight_decay},
      {"beta1", cfg.optim.beta1},
      {"beta2", cfg.optim.beta2},
      {"eps", cfg.optim.eps},
      {"momentum", cfg.optim.momentum},
      {"warmup_steps", cfg.optim.warmup_steps},
  };
  j["run"] = {
      {"epochs", cfg.run.epochs},
      {"batch_size", cfg.run.batch_size},
      {"seed", cfg.run.seed},
      {"train_image_size", cfg.run.train_image_size},
      {"eval_every", cfg.run.eval_every},
      {"log_every", cfg.run.log_every},
      {"max_steps", cfg.run.max_steps},
      {"precision", cfg.run.precision},
      {"ablation_seeds", cfg.run.ablation_seeds},
      {"sweep_lambda", cfg.run.sweep_lambda},
      {"sweep_m", cfg.run.sweep_m},
  };
  return j;
}

namespace {

bool same_kind(const json& schema, const json& value) {
  if (schema.is_object()) return value.is_object();
  if (schema.is_array()) return value.is_array();
  if (schema.is_string()) return value.is_string();
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_number_integer() || schema.is_number_unsigned())
    return value.is_number_integer() || value.is_number_unsigned();
  if (schema.is_number_float()) return value.is_number();
  return false;
}

// Every key in `value` must exist in `schema` with a compatible type; nested
// objects recurse. Rejects typos like "optim.lernig_rate" up front.
void check_against_schema(const json& schema, const json& value,
                          const std::string& path) {
  for (auto it = value.begin(); it != value.end(); ++it) {
    const std::string here = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key()))
      throw ConfigError("unknown config key: " + here);
    const json& s = schema.at(it.key());
    if (!same_kind(s, it.value()))
      throw ConfigError("config key " + here + " expects " +
                        std::string(s.type_name()) + ", got " +
                        std::string(it.value().type_name()));
    if (s.is_object()) check_against_schema(s, it.value(), here);
  }
}

void deep_merge(json* base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it.value().is_object() && base->contains(it.key()) &&
        (*base)[it.key()].is_object())
      deep_merge(&(*base)[it.key()], it.value());
    else
      (*base)[it.key()] = it.value();
  }
}

template <typename T>
T get(const json& j, const char* key) {
  return j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json(const json& j) {
  const json schema = to_json(TrainConfig{});
  check_against_schema(schema, j, "");
  json full = schema;
  deep_merge(&full, j);

  TrainConfig cfg;
  const json& d = full.at("data");
  cfg.data.root = get<std::string>(d, "root");
  cfg.data.synth.image_size = get<int>(d, "image_size");
  cfg.data.synth.n_videos_train = get<int>(d, "n_videos_train");
  cfg.data.synth.n_videos_val = get<int>(d, "n_videos_val");
  cfg.data.synth.n_videos_test = get<int>(d, "n_videos_test");
  cfg.data.synth.frames_per_video = get<int>(d, "frames_per_video");
  cfg.data.synth.perturbed_bands.clear();
  for (const auto& band : d.at("perturbed_bands")) {
    check(band.is_array() && band.size() == 2 && band[0].is_number_integer() &&
              band[1].is_number_integer(),
          "data.perturbed_bands entries must be [u, v] integer pairs");
    cfg.data.synth.perturbed_bands.emplace_back(band[0].get<int>(),
                                                band[1].get<int>());
  }
  cfg.data.synth.amplitude = get<double>(d, "amplitude");
  cfg.data.synth.seed = get<uint64_t>(d, "synth_seed");
  cfg.data.synth.jpeg_quality = get<int>(d, "jpeg_quality");
  cfg.data.frames_per_real_video = get<int>(d, "frames_per_real_video");
  cfg.data.frames_per_fake_video = get<int>(d, "frames_per_fake_video");

  const json& m = full.at("model");
  cfg.model.backbone = get<std::string>(m, "backbone");
  cfg.model.backbone_widths = get<std::vector<int>>(m, "backbone_widths");
  cfg.model.use_affgm = get<bool>(m, "use_affgm");
  const json& a = m.at("afimb");
  cfg.model.afimb.grouped_conv_out = get<int>(a, "grouped_conv_out");
  cfg.model.afimb.mid_channels = get<int>(a, "mid_channels");
  cfg.model.afimb.pool_kernel = get<int>(a, "pool_kernel");
  cfg.model.afimb.pool_stride = get<int>(a, "pool_stride");
  cfg.model.afimb.attention_reduction = get<int>(a, "attention_reduction");
  cfg.model.afimb.out_channels = get<int>(a, "out_channels");
  const json& f = m.at("fusion");
  cfg.model.fusion.kind =
      model::fusion_kind_from_string(get<std::string>(f, "kind"));
  cfg.model.fusion.kernel = get<int>(f, "kernel");
  cfg.model.fusion.groups = get<int>(f, "groups");
  cfg.model.embedding_dim = get<int>(m, "embedding_dim");
  cfg.model.num_classes = get<int>(m, "num_classes");

  const json& l = full.at("loss");
  cfg.loss.variant = loss_variant_from_string(get<std::string>(l, "variant"));
  cfg.loss.scl.m = get<double>(l, "m");
  cfg.loss.scl.lambda = get<double>(l, "lambda");
  cfg.loss.scl.eps_dist = get<double>(l, "eps_dist");
  cfg.loss.aux_weight = get<double>(l, "aux_weight");
  cfg.loss.triplet_margin = get<double>(l, "triplet_margin");

  const json& o = full.at("optim");
  cfg.optim.kind = get<std::string>(o, "kind");
  cfg.optim.lr = get<double>(o, "lr");
  cfg.optim.weight_decay = get<double>(o, "weight_decay");
  cfg.optim.beta1 = get<double>(o, "beta1");
  cfg.optim.beta2 = get<double>(o, "beta2");
  cfg.optim.eps = get<double>(o, "eps");
  cfg.optim.momentum = get<double>(o, "momentum");
  cfg.optim.warmup_steps = get<int>(o, "warmup_steps");

  const json& r = full.at("run");
  cfg.run.epochs = get<int>(r, "epochs");
  cfg.run.batch_size = get<int>(r, "batch_size");
  cfg.run.seed = get<uint64_t>(r, "seed");
  cfg.run.train_image_size = get<int>(r, "train_image_size");
  cfg.run.eval_every = get<int>(r, "eval_every");
  cfg.run.log_every = get<int>(r, "log_every");
  cfg.run.max_steps = get<int>(r, "max_steps");
  cfg.run.precision = get<std::string>(r, "precision");
  cfg.run.ablation_seeds = get<int>(r, "ablation_seeds");
  cfg.run.sweep_lambda = get<std::vector<double>>(r, "sweep_lambda");
  cfg.run.sweep_m = get<std::vector<double>>(r, "sweep_m");
  return cfg;
}

void apply_override(json* cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like section.key=value: " +
                      assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  size_t start = 0;
  for (size_t dot = key.find('.'); dot != std::string::npos;
       dot = key.find('.', start)) {
    parts.push_back(key.substr(start, dot - start));
    start = dot + 1;
  }
  parts.push_back(key.substr(start));

  json* node = cfg;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object())
      throw ConfigError("unknown config key: " + key);
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf)) throw ConfigError("unknown config key: " + key);

  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;  // bare word -> string

  if (!same_kind(node->at(leaf), value))
    throw ConfigError("override " + key + " expects " +
                      std::string(node->at(leaf).type_name()) + ", got " +
                      std::string(value.type_name()));
  (*node)[leaf] = value;
}

TrainConfig parse_config(const std::string& path,
                         const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("cannot open config file: " + path);
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  }
  json full = to_json(TrainConfig{});
  check_against_schema(full, j, "");
  deep_merge(&full, j);
  for (const auto& o : overrides) apply_override(&full, o);

  TrainConfig cfg = train_config_from_json(full);
  cfg.validate();
  return cfg;
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "cannot write config to " + path);
  out << to_json(cfg).dump(2) << "\n";
}

}  // namespace fdfl::config
