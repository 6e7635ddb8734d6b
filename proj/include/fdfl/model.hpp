#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdfl/nn.hpp"
#include "fdfl/tensor.hpp"

namespace fdfl::model {

// Frequency mining block geometry. Channel widths are configuration, not
// paper-fixed; defaults align with the reference backbone tap.
struct AfimbConfig {
  int grouped_conv_out = 192;  // must divide by 3
  int mid_channels = 256;
  int pool_kernel = 2;
  int pool_stride = 2;
  int attention_reduction = 64;  // hidden size of the gate MLP
  int out_channels = 256;

  void validate() const;
};

enum class FusionKind { kConcat, kSum, kConv };

struct FusionConfig {
  FusionKind kind = FusionKind::kConv;
  int kernel = 1;  // conv only: 1 or 3
  int groups = 1;  // conv only: 1 or 2

  void validate() const;
};

FusionKind fusion_kind_from_string(const std::string& s);
std::string to_string(FusionKind k);

struct ModelConfig {
  std::string backbone = "reference";
  std::vector<int> backbone_widths = {24, 48, 96, 128};
  bool use_affgm = true;
  AfimbConfig afimb;
  FusionConfig fusion;
  int embedding_dim = 1000;
  int num_classes = 2;

  void validate() const;
};

// group-3 conv block -> plain conv block -> max-pool -> channel attention ->
// 1x1 conv. Input is the 192-channel regrouped DCT tensor.
class Afimb {
 public:
  explicit Afimb(const AfimbConfig& cfg);

  Tensor forward(const Tensor& freq, bool train);
  Tensor backward(const Tensor& gy);
  void init(nn::Rng& rng);
  void collect_params(std::vector<nn::ParamRef>* out);
  void collect_buffers(std::vector<nn::ParamRef>* out);

  nn::ConvBlock& grouped_block() { return grouped_; }
  nn::ChannelAttention& attention() { return attn_; }

 private:
  AfimbConfig cfg_;
  nn::ConvBlock grouped_;
  nn::ConvBlock mid_;
  nn::MaxPool2d pool_;
  nn::ChannelAttention attn_;
  nn::Conv2d out_conv_;
};

// Merges the RGB tap and the frequency features. Output channel count is
// rgb channels (sum/conv) or their sum (concat).
class Fusion {
 public:
  Fusion(const FusionConfig& cfg, int rgb_channels, int freq_channels);

  Tensor forward(const Tensor& rgb, const Tensor& freq, bool train);
  // returns (grad_rgb, grad_freq)
  std::pair<Tensor, Tensor> backward(const Tensor& gy);
  void init(nn::Rng& rng);
  void collect_params(std::vector<nn::ParamRef>* out);
  void collect_buffers(std::vector<nn::ParamRef>* out);
  int out_channels() const { return out_channels_; }

 private:
  FusionConfig cfg_;
  int rgb_ch_ = 0, freq_ch_ = 0, out_channels_ = 0;
  std::optional<nn::ConvBlock> proj_;
};

// Backbone contract: an early stage ending at the fusion tap, and the rest of
// the network producing a pooled feature vector.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual Tensor forward_early(const Tensor& img, bool train) = 0;
  virtual Tensor backward_early(const Tensor& g_tap) = 0;
  virtual Mat forward_late(const Tensor& tap, bool train) = 0;
  virtual Tensor backward_late(const Mat& g_feat) = 0;
  virtual int tap_channels() const = 0;
  virtual int tap_stride() const = 0;
  virtual int feature_dim() const = 0;
  // Called once before init when fusion changes the tap channel count.
  virtual void set_late_in_channels(int c) = 0;
  virtual void init(nn::Rng& rng) = 0;
  virtual void collect_params(std::vector<nn::ParamRef>* out) = 0;
  virtual void collect_buffers(std::vector<nn::ParamRef>* out) = 0;
};

std::unique_ptr<Backbone> make_backbone(const ModelConfig& cfg);

// Two double-stride stages before the tap (cumulative stride 16), two
// stride-2 stages after, then global average pooling.
class ReferenceBackbone : public Backbone {
 public:
  explicit ReferenceBackbone(const std::vector<int>& widths);

  Tensor forward_early(const Tensor& img, bool train) override;
  Tensor backward_early(const Tensor& g_tap) override;
  Mat forward_late(const Tensor& tap, bool train) override;
  Tensor backward_late(const Mat& g_feat) override;
  int tap_channels() const override { return widths_[1]; }
  int tap_stride() const override { return 16; }
  int feature_dim() const override { return widths_[3]; }
  void set_late_in_channels(int c) override;
  void init(nn::Rng& rng) override;
  void collect_params(std::vector<nn::ParamRef>* out) override;
  void collect_buffers(std::vector<nn::ParamRef>* out) override;

 private:
  std::vector<int> widths_;
  nn::ConvBlock s1a_, s1b_, s2a_, s2b_;  // early, stride 2 each
  nn::ConvBlock s3_, s4_;                // late
  nn::GlobalAvgPool gap_;
};

struct ModelOutput {
  Tensor tap;      // early feature map at the fusion point (post-fusion)
  Mat embeddings;  // B x D
  Mat logits;      // B x 2
};

// RGB branch + optional AFFGM branch + embedding head + 2-way classifier.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  // freq must be a (B,192,H/8,W/8) batch when the AFFGM branch is enabled;
  // pass an empty tensor otherwise.
  ModelOutput forward(const Tensor& imgs, const Tensor& freq, bool train);
  void backward(const Mat& g_logits, const Mat& g_embeddings);
  void zero_grad();
  void init(uint64_t seed);

  std::vector<nn::ParamRef> params();
  std::vector<nn::ParamRef> buffers();
  const ModelConfig& config() const { return cfg_; }
  Backbone& backbone() { return *backbone_; }
  Afimb* afimb() { return afimb_ ? &*afimb_ : nullptr; }

 private:
  ModelConfig cfg_;
  std::unique_ptr<Backbone> backbone_;
  std::optional<Afimb> afimb_;
  std::optional<Fusion> fusion_;
  nn::Linear embed_;
  nn::Linear classifier_;
};

}  // namespace fdfl::model
