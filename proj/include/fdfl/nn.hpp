#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdfl/tensor.hpp"

namespace fdfl::nn {

// Deterministic RNG with hand-rolled Box-Muller so draws are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  uint64_t next_u64();
  double uniform();               // [0, 1)
  double normal();                // standard gaussian
  int uniform_int(int lo, int hi);  // inclusive bounds

  // Independent stream derived from (seed, tag); keeps parameter init, center
  // init and data order decoupled so loss-variant choice cannot shift them.
  static Rng stream(uint64_t seed, const std::string& tag);

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

struct ParamRef {
  std::string name;
  std::vector<double>* value = nullptr;
  std::vector<double>* grad = nullptr;  // null for buffers
  bool decay = false;                   // weight decay applies
};

// --- layers -----------------------------------------------------------------
// Each layer caches what its backward pass needs during forward(train=true).
// backward() accumulates parameter gradients and returns the input gradient.

struct Conv2d {
  int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1, groups = 1;
  std::vector<double> w, b, gw, gb;

  Conv2d() = default;
  Conv2d(int in_c, int out_c, int kernel, int stride_, int groups_ = 1);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void init(Rng& rng);
  void collect_params(const std::string& prefix, std::vector<ParamRef>* out);
  int out_dim(int in) const { return (in + 2 * pad - k) / stride + 1; }

 private:
  Tensor x_;
};

struct BatchNorm2d {
  int ch = 0;
  double momentum = 0.1, eps = 1e-5;
  bool identity = false;  // pass-through (used by locality tests)
  std::vector<double> gamma, beta, ggamma, gbeta;
  std::vector<double> run_mean, run_var;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void init(Rng& rng);
  void collect_params(const std::string& prefix, std::vector<ParamRef>* out);
  void collect_buffers(const std::string& prefix, std::vector<ParamRef>* out);

 private:
  Tensor x_;
  std::vector<double> mean_, var_;
};

struct ReLU {
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  Mat forward(const Mat& x, bool train);
  Mat backward(const Mat& gy);

 private:
  std::vector<char> mask_;
};

struct MaxPool2d {
  int k = 2, stride = 2;

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);

 private:
  int in_h = 0, in_w = 0, in_c = 0, in_n = 0;
  std::vector<int> argmax_;
};

// Global spatial max descriptor, (B,C,H,W) -> (B,C).
struct GlobalMaxPool {
  Mat forward(const Tensor& x, bool train);
  Tensor backward(const Mat& gy);

 private:
  int in_h = 0, in_w = 0;
  std::vector<int> argmax_;
};

struct GlobalAvgPool {
  Mat forward(const Tensor& x, bool train);
  Tensor backward(const Mat& gy);

 private:
  int in_h = 0, in_w = 0;
};

struct Linear {
  int in_dim = 0, out_dim = 0;
  std::vector<double> w, b, gw, gb;  // w is [out_dim, in_dim] row-major

  Linear() = default;
  Linear(int in_d, int out_d);

  Mat forward(const Mat& x, bool train);
  Mat backward(const Mat& gy);
  void init(Rng& rng);
  void collect_params(const std::string& prefix, std::vector<ParamRef>* out);

 private:
  Mat x_;
};

struct Sigmoid {
  Mat forward(const Mat& x, bool train);
  Mat backward(const Mat& gy);

 private:
  Mat y_;
};

// conv + batch normalization + ReLU.
struct ConvBlock {
  Conv2d conv;
  BatchNorm2d norm;
  ReLU relu;

  ConvBlock() = default;
  ConvBlock(int in_c, int out_c, int kernel, int stride, int groups = 1);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void init(Rng& rng);
  void collect_params(const std::string& prefix, std::vector<ParamRef>* out);
  void collect_buffers(const std::string& prefix, std::vector<ParamRef>* out);
};

// Gate from a global max descriptor: linear -> ReLU -> linear -> sigmoid,
// scaling channels multiplicatively. Gate values stay in (0,1).
struct ChannelAttention {
  Linear fc1, fc2;
  ReLU relu;
  Sigmoid sigmoid;
  GlobalMaxPool gmp;

  ChannelAttention() = default;
  ChannelAttention(int channels, int hidden);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  void init(Rng& rng);
  void collect_params(const std::string& prefix, std::vector<ParamRef>* out);
  // Gate for the last forward batch, (B,C). Exposed for tests/inspection.
  const Mat& last_gate() const { return gate_; }

 private:
  Tensor x_;
  Mat gate_;
};

}  // namespace fdfl::nn
