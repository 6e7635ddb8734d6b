#include "fdfl/model.hpp"

#include "fdfl/freq.hpp"

namespace fdfl::model {

void AfimbConfig::validate() const {
  check(grouped_conv_out > 0 && grouped_conv_out % 3 == 0,
        "afimb.grouped_conv_out must be a positive multiple of 3");
  check(mid_channels >= 1 && out_channels >= 1 && attention_reduction >= 1,
        "afimb channel counts must be >= 1");
  check(pool_kernel >= 1 && pool_stride >= 1, "afimb pool geometry invalid");
}

void FusionConfig::validate() const {
  if (kind == FusionKind::kConv) {
    check(kernel == 1 || kernel == 3, "fusion.kernel must be 1 or 3");
    check(groups == 1 || groups == 2, "fusion.groups must be 1 or 2");
  }
}

FusionKind fusion_kind_from_string(const std::string& s) {
  if (s == "concat") return FusionKind::kConcat;
  if (s == "sum") return FusionKind::kSum;
  if (s == "conv") return FusionKind::kConv;
  throw ConfigError("unknown fusion kind: " + s);
}

std::string to_string(FusionKind k) {
  switch (k) {
    case FusionKind::kConcat: return "concat";
    case FusionKind::kSum: return "sum";
    case FusionKind::kConv: return "conv";
  }
  return "?";
}

void ModelConfig::validate() const {
  check(embedding_dim >= 2, "embedding_dim must be >= 2");
  check(num_classes == 2, "classifier is 2-way");
  check(backbone == "reference", "unknown backbone id: " + backbone);
  check(backbone_widths.size() == 4, "reference backbone needs 4 widths");
  for (int w : backbone_widths) check(w >= 1, "backbone widths must be >= 1");
  afimb.validate();
  fusion.validate();
}

// --- Afimb -------------------------------------------------------------------

Afimb::Afimb(const AfimbConfig& cfg)
    : cfg_(cfg),
      grouped_(freq::kChannels, cfg.grouped_conv_out, 3, 1, 3),
      mid_(cfg.grouped_conv_out, cfg.mid_channels, 3, 1),
      attn_(cfg.mid_channels, cfg.attention_reduction),
      out_conv_(cfg.mid_channels, cfg.out_channels, 1, 1) {
  pool_.k = cfg.pool_kernel;
  pool_.stride = cfg.pool_stride;
}

Tensor Afimb::forward(const Tensor& freq, bool train) {
  check(freq.c() == freq::kChannels,
        "AFIMB expects 192 input channels, got " + std::to_string(freq.c()));
  Tensor t = grouped_.forward(freq, train);
  t = mid_.forward(t, train);
  t = pool_.forward(t, train);
  t = attn_.forward(t, train);
  return out_conv_.forward(t, train);
}

Tensor Afimb::backward(const Tensor& gy) {
  Tensor g = out_conv_.backward(gy);
  g = attn_.backward(g);
  g = pool_.backward(g);
  g = mid_.backward(g);
  return grouped_.backward(g);
}

void Afimb::init(nn::Rng& rng) {
  grouped_.init(rng);
  mid_.init(rng);
  attn_.init(rng);
  out_conv_.init(rng);
}

void Afimb::collect_params(std::vector<nn::ParamRef>* out) {
  grouped_.collect_params("afimb.grouped", out);
  mid_.collect_params("afimb.mid", out);
  attn_.collect_params("afimb.attn", out);
  out_conv_.collect_params("afimb.out_conv", out);
}

void Afimb::collect_buffers(std::vector<nn::ParamRef>* out) {
  grouped_.collect_buffers("afimb.grouped", out);
  mid_.collect_buffers("afimb.mid", out);
}

// --- Fusion ------------------------------------------------------------------

Fusion::Fusion(const FusionConfig& cfg, int rgb_channels, int freq_channels)
    : cfg_(cfg), rgb_ch_(rgb_channels), freq_ch_(freq_channels) {
  cfg.validate();
  switch (cfg.kind) {
    case FusionKind::kConcat:
      out_channels_ = rgb_ch_ + freq_ch_;
      break;
    case FusionKind::kSum:
      check(rgb_ch_ == freq_ch_,
            "sum fusion requires equal channel counts, got " +
                std::to_string(rgb_ch_) + " vs " + std::to_string(freq_ch_));
      out_channels_ = rgb_ch_;
      break;
    case FusionKind::kConv:
      out_channels_ = rgb_ch_;
      check((rgb_ch_ + freq_ch_) % cfg.groups == 0 &&
                out_channels_ % cfg.groups == 0,
            "fusion conv groups must divide channel counts");
      proj_.emplace(rgb_ch_ + freq_ch_, out_channels_, cfg.kernel, 1, cfg.groups);
      break;
  }
}

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
        "fusion inputs must share batch and spatial dims: " + a.shape_str() +
            " vs " + b.shape_str());
  Tensor y(a.n(), a.c() + b.c(), a.h(), a.w());
  const size_t spatial = static_cast<size_t>(a.h()) * a.w();
  for (int i = 0; i < a.n(); ++i) {
    for (int c = 0; c < a.c(); ++c)
      std::copy_n(a.plane(i, c), spatial, y.plane(i, c));
    for (int c = 0; c < b.c(); ++c)
      std::copy_n(b.plane(i, c), spatial, y.plane(i, a.c() + c));
  }
  return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& g, int c1, int c2) {
  Tensor ga(g.n(), c1, g.h(), g.w());
  Tensor gb(g.n(), c2, g.h(), g.w());
  const size_t spatial = static_cast<size_t>(g.h()) * g.w();
  for (int i = 0; i < g.n(); ++i) {
    for (int c = 0; c < c1; ++c)
      std::copy_n(g.plane(i, c), spatial, ga.plane(i, c));
    for (int c = 0; c < c2; ++c)
      std::copy_n(g.plane(i, c1 + c), spatial, gb.plane(i, c));
  }
  return {std::move(ga), std::move(gb)};
}

}  // namespace

Tensor Fusion::forward(const Tensor& rgb, const Tensor& freq, bool train) {
  check(rgb.c() == rgb_ch_ && freq.c() == freq_ch_, "fusion channel mismatch");
  switch (cfg_.kind) {
    case FusionKind::kConcat:
      return concat_channels(rgb, freq);
    case FusionKind::kSum: {
      check(rgb.same_shape(freq), "sum fusion requires identical shapes");
      Tensor y = rgb;
      for (int64_t i = 0; i < y.size(); ++i) y.data()[i] += freq.data()[i];
      return y;
    }
    case FusionKind::kConv:
      return proj_->forward(concat_channels(rgb, freq), train);
  }
  throw std::logic_error("unreachable");
}

std::pair<Tensor, Tensor> Fusion::backward(const Tensor& gy) {
  switch (cfg_.kind) {
    case FusionKind::kConcat:
      return split_channels(gy, rgb_ch_, freq_ch_);
    case FusionKind::kSum:
      return {gy, gy};
    case FusionKind::kConv:
      return split_channels(proj_->backward(gy), rgb_ch_, freq_ch_);
  }
  throw std::logic_error("unreachable");
}

void Fusion::init(nn::Rng& rng) {
  if (proj_) proj_->init(rng);
}

void Fusion::collect_params(std::vector<nn::ParamRef>* out) {
  if (proj_) proj_->collect_params("fusion.proj", out);
}

void Fusion::collect_buffers(std::vector<nn::ParamRef>* out) {
  if (proj_) proj_->collect_buffers("fusion.proj", out);
}

// --- ReferenceBackbone -------------------------------------------------------

ReferenceBackbone::ReferenceBackbone(const std::vector<int>& widths)
    : widths_(widths),
      s1a_(3, widths[0], 3, 2),
      s1b_(widths[0], widths[0], 3, 2),
      s2a_(widths[0], widths[1], 3, 2),
      s2b_(widths[1], widths[1], 3, 2),
      s3_(widths[1], widths[2], 3, 2),
      s4_(widths[2], widths[3], 3, 2) {}

void ReferenceBackbone::set_late_in_channels(int c) {
  if (c != widths_[1]) s3_ = nn::ConvBlock(c, widths_[2], 3, 2);
}

Tensor ReferenceBackbone::forward_early(const Tensor& img, bool train) {
  check(img.c() == 3, "backbone expects RGB input");
  Tensor t = s1a_.forward(img, train);
  t = s1b_.forward(t, train);
  t = s2a_.forward(t, train);
  return s2b_.forward(t, train);
}

Tensor ReferenceBackbone::backward_early(const Tensor& g_tap) {
  Tensor g = s2b_.backward(g_tap);
  g = s2a_.backward(g);
  g = s1b_.backward(g);
  return s1a_.backward(g);
}

Mat ReferenceBackbone::forward_late(const Tensor& tap, bool train) {
  Tensor t = s3_.forward(tap, train);
  t = s4_.forward(t, train);
  return gap_.forward(t, train);
}

Tensor ReferenceBackbone::backward_late(const Mat& g_feat) {
  Tensor g = gap_.backward(g_feat);
  g = s4_.backward(g);
  return s3_.backward(g);
}

void ReferenceBackbone::init(nn::Rng& rng) {
  s1a_.init(rng);
  s1b_.init(rng);
  s2a_.init(rng);
  s2b_.init(rng);
  s3_.init(rng);
  s4_.init(rng);
}

void ReferenceBackbone::collect_params(std::vector<nn::ParamRef>* out) {
  s1a_.collect_params("backbone.s1a", out);
  s1b_.collect_params("backbone.s1b", out);
  s2a_.collect_params("backbone.s2a", out);
  s2b_.collect_params("backbone.s2b", out);
  s3_.collect_params("backbone.s3", out);
  s4_.collect_params("backbone.s4", out);
}

void ReferenceBackbone::collect_buffers(std::vector<nn::ParamRef>* out) {
  s1a_.collect_buffers("backbone.s1a", out);
  s1b_.collect_buffers("backbone.s1b", out);
  s2a_.collect_buffers("backbone.s2a", out);
  s2b_.collect_buffers("backbone.s2b", out);
  s3_.collect_buffers("backbone.s3", out);
  s4_.collect_buffers("backbone.s4", out);
}

std::unique_ptr<Backbone> make_backbone(const ModelConfig& cfg) {
  cfg.validate();
  if (cfg.backbone == "reference")
    return std::make_unique<ReferenceBackbone>(cfg.backbone_widths);
  throw ConfigError("unknown backbone id: " + cfg.backbone);
}

// --- Model -------------------------------------------------------------------

Model::Model(const ModelConfig& cfg)
    : cfg_(cfg), backbone_(make_backbone(cfg)) {
  if (cfg.use_affgm) {
    afimb_.emplace(cfg.afimb);
    fusion_.emplace(cfg.fusion, backbone_->tap_channels(),
                    cfg.afimb.out_channels);
    backbone_->set_late_in_channels(fusion_->out_channels());
  }
  embed_ = nn::Linear(backbone_->feature_dim(), cfg.embedding_dim);
  classifier_ = nn::Linear(cfg.embedding_dim, cfg.num_classes);
}

void Model::init(uint64_t seed) {
  nn::Rng rng = nn::Rng::stream(seed, "params");
  backbone_->init(rng);
  if (afimb_) afimb_->init(rng);
  if (fusion_) fusion_->init(rng);
  embed_.init(rng);
  classifier_.init(rng);
}

ModelOutput Model::forward(const Tensor& imgs, const Tensor& freq, bool train) {
  ModelOutput out;
  Tensor tap = backbone_->forward_early(imgs, train);
  if (afimb_) {
    check(!freq.empty(), "AFFGM branch enabled but no frequency input given");
    Tensor f = afimb_->forward(freq, train);
    check(f.h() == tap.h() && f.w() == tap.w(),
          "frequency features " + f.shape_str() +
              " misaligned with fusion point " + tap.shape_str());
    tap = fusion_->forward(tap, f, train);
  }
  out.tap = tap;
  Mat feat = backbone_->forward_late(tap, train);
  out.embeddings = embed_.forward(feat, train);
  out.logits = classifier_.forward(out.embeddings, train);
  return out;
}

void Model::backward(const Mat& g_logits, const Mat& g_embeddings) {
  Mat g_emb = classifier_.backward(g_logits);
  check(g_emb.rows() == g_embeddings.rows() && g_emb.cols() == g_embeddings.cols(),
        "embedding gradient shape mismatch");
  for (int64_t i = 0; i < g_emb.size(); ++i)
    g_emb.data()[i] += g_embeddings.data()[i];
  Mat g_feat = embed_.backward(g_emb);
  Tensor g_tap = backbone_->backward_late(g_feat);
  if (afimb_) {
    auto [g_rgb, g_freq] = fusion_->backward(g_tap);
    afimb_->backward(g_freq);
    backbone_->backward_early(g_rgb);
  } else {
    backbone_->backward_early(g_tap);
  }
}

void Model::zero_grad() {
  for (auto& p : params())
    std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

std::vector<nn::ParamRef> Model::params() {
  std::vector<nn::ParamRef> out;
  backbone_->collect_params(&out);
  if (afimb_) afimb_->collect_params(&out);
  if (fusion_) fusion_->collect_params(&out);
  embed_.collect_params("embed", &out);
  classifier_.collect_params("classifier", &out);
  return out;
}

std::vector<nn::ParamRef> Model::buffers() {
  std::vector<nn::ParamRef> out;
  backbone_->collect_buffers(&out);
  if (afimb_) afimb_->collect_buffers(&out);
  if (fusion_) fusion_->collect_buffers(&out);
  return out;
}

}  // namespace fdfl::model
