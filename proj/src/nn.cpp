#include "fdfl/nn.hpp"

#include <cmath>
#include <cstring>

#include <Eigen/Dense>

namespace fdfl::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// im2col: [in_ch*k*k, out_h*out_w] for one sample, channel-major rows.
void im2col(const double* x, int c, int h, int w, int k, int stride, int pad,
            double* cols, int out_h, int out_w) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<size_t>(ci) * k * k + ky * k + kx) *
                                 (static_cast<size_t>(out_h) * out_w);
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::memset(row + static_cast<size_t>(oy) * out_w, 0,
                        sizeof(double) * out_w);
            continue;
          }
          const double* src = x + (static_cast<size_t>(ci) * h + iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[static_cast<size_t>(oy) * out_w + ox] =
                (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int c, int h, int w, int k, int stride, int pad,
            double* gx, int out_h, int out_w) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<size_t>(ci) * k * k + ky * k + kx) *
                                       (static_cast<size_t>(out_h) * out_w);
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = gx + (static_cast<size_t>(ci) * h + iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w)
              dst[ix] += row[static_cast<size_t>(oy) * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

// --- Rng ---------------------------------------------------------------------

uint64_t Rng::next_u64() {
  state_ = splitmix64(state_);
  return state_;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::acos(-1.0) * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

int Rng::uniform_int(int lo, int hi) {
  return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
}

Rng Rng::stream(uint64_t seed, const std::string& tag) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return Rng(splitmix64(seed ^ h));
}

// --- Conv2d ------------------------------------------------------------------

Conv2d::Conv2d(int in_c, int out_c, int kernel, int stride_, int groups_)
    : in_ch(in_c), out_ch(out_c), k(kernel), stride(stride_), pad(kernel / 2),
      groups(groups_) {
  check(in_ch % groups == 0 && out_ch % groups == 0,
        "conv channels must divide groups");
  w.assign(static_cast<size_t>(out_ch) * (in_ch / groups) * k * k, 0.0);
  b.assign(out_ch, 0.0);
  gw.assign(w.size(), 0.0);
  gb.assign(b.size(), 0.0);
}

void Conv2d::init(Rng& rng) {
  const int fan_in = (in_ch / groups) * k * k;
  const double std = std::sqrt(2.0 / fan_in);
  for (auto& v : w) v = rng.normal() * std;
  std::fill(b.begin(), b.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  check(x.c() == in_ch, "Conv2d: expected " + std::to_string(in_ch) +
                            " input channels, got " + std::to_string(x.c()));
  const int oh = out_dim(x.h()), ow = out_dim(x.w());
  check(oh > 0 && ow > 0, "Conv2d: input too small: " + x.shape_str());
  Tensor y(x.n(), out_ch, oh, ow);
  const int cg = in_ch / groups, og = out_ch / groups;
  const size_t cols_rows = static_cast<size_t>(cg) * k * k;
  const size_t spatial = static_cast<size_t>(oh) * ow;
  std::vector<double> cols(cols_rows * spatial);
  for (int i = 0; i < x.n(); ++i) {
    for (int g = 0; g < groups; ++g) {
      im2col(x.plane(i, g * cg), cg, x.h(), x.w(), k, stride, pad, cols.data(),
             oh, ow);
      CMapMat W(w.data() + static_cast<size_t>(g) * og * cols_rows,
                og, static_cast<Eigen::Index>(cols_rows));
      CMapMat C(cols.data(), static_cast<Eigen::Index>(cols_rows),
                static_cast<Eigen::Index>(spatial));
      MapMat Y(y.plane(i, g * og), og, static_cast<Eigen::Index>(spatial));
      Y.noalias() = W * C;
    }
    for (int oc = 0; oc < out_ch; ++oc) {
      double* p = y.plane(i, oc);
      for (size_t s = 0; s < spatial; ++s) p[s] += b[oc];
    }
  }
  if (train) x_ = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  check(!x_.empty(), "Conv2d::backward without cached forward");
  const Tensor& x = x_;
  const int oh = gy.h(), ow = gy.w();
  const int cg = in_ch / groups, og = out_ch / groups;
  const size_t cols_rows = static_cast<size_t>(cg) * k * k;
  const size_t spatial = static_cast<size_t>(oh) * ow;
  std::vector<double> cols(cols_rows * spatial);
  std::vector<double> gcols(cols_rows * spatial);
  Tensor gx(x.n(), x.c(), x.h(), x.w());
  for (int i = 0; i < x.n(); ++i) {
    for (int g = 0; g < groups; ++g) {
      im2col(x.plane(i, g * cg), cg, x.h(), x.w(), k, stride, pad, cols.data(),
             oh, ow);
      CMapMat GY(gy.plane(i, g * og), og, static_cast<Eigen::Index>(spatial));
      CMapMat C(cols.data(), static_cast<Eigen::Index>(cols_rows),
                static_cast<Eigen::Index>(spatial));
      MapMat GW(gw.data() + static_cast<size_t>(g) * og * cols_rows,
                og, static_cast<Eigen::Index>(cols_rows));
      GW.noalias() += GY * C.transpose();
      CMapMat W(w.data() + static_cast<size_t>(g) * og * cols_rows,
                og, static_cast<Eigen::Index>(cols_rows));
      MapMat GC(gcols.data(), static_cast<Eigen::Index>(cols_rows),
                static_cast<Eigen::Index>(spatial));
      GC.noalias() = W.transpose() * GY;
      col2im(gcols.data(), cg, x.h(), x.w(), k, stride, pad,
             gx.plane(i, g * cg), oh, ow);
    }
    for (int oc = 0; oc < out_ch; ++oc) {
      const double* p = gy.plane(i, oc);
      double s = 0.0;
      for (size_t q = 0; q < spatial; ++q) s += p[q];
      gb[oc] += s;
    }
  }
  return gx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<ParamRef>* out) {
  out->push_back({prefix + ".w", &w, &gw, true});
  out->push_back({prefix + ".b", &b, &gb, false});
}

// --- BatchNorm2d -------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels) : ch(channels) {
  gamma.assign(ch, 1.0);
  beta.assign(ch, 0.0);
  ggamma.assign(ch, 0.0);
  gbeta.assign(ch, 0.0);
  run_mean.assign(ch, 0.0);
  run_var.assign(ch, 1.0);
}

void BatchNorm2d::init(Rng&) {
  std::fill(gamma.begin(), gamma.end(), 1.0);
  std::fill(beta.begin(), beta.end(), 0.0);
  std::fill(run_mean.begin(), run_mean.end(), 0.0);
  std::fill(run_var.begin(), run_var.end(), 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  check(x.c() == ch, "BatchNorm2d: channel mismatch");
  if (identity) {
    if (train) x_ = x;
    return x;
  }
  Tensor y(x.n(), x.c(), x.h(), x.w());
  const size_t spatial = static_cast<size_t>(x.h()) * x.w();
  const double m_count = static_cast<double>(x.n()) * spatial;
  if (train) {
    mean_.assign(ch, 0.0);
    var_.assign(ch, 0.0);
    for (int i = 0; i < x.n(); ++i)
      for (int c = 0; c < ch; ++c) {
        const double* p = x.plane(i, c);
        double s = 0.0;
        for (size_t q = 0; q < spatial; ++q) s += p[q];
        mean_[c] += s;
      }
    for (int c = 0; c < ch; ++c) mean_[c] /= m_count;
    for (int i = 0; i < x.n(); ++i)
      for (int c = 0; c < ch; ++c) {
        const double* p = x.plane(i, c);
        double s = 0.0;
        for (size_t q = 0; q < spatial; ++q) {
          const double d = p[q] - mean_[c];
          s += d * d;
        }
        var_[c] += s;
      }
    for (int c = 0; c < ch; ++c) var_[c] /= m_count;
    for (int c = 0; c < ch; ++c) {
      run_mean[c] = (1.0 - momentum) * run_mean[c] + momentum * mean_[c];
      run_var[c] = (1.0 - momentum) * run_var[c] + momentum * var_[c];
    }
    for (int i = 0; i < x.n(); ++i)
      for (int c = 0; c < ch; ++c) {
        const double inv = 1.0 / std::sqrt(var_[c] + eps);
        const double* p = x.plane(i, c);
        double* q = y.plane(i, c);
        for (size_t s = 0; s < spatial; ++s)
          q[s] = gamma[c] * (p[s] - mean_[c]) * inv + beta[c];
      }
    x_ = x;
  } else {
    for (int i = 0; i < x.n(); ++i)
      for (int c = 0; c < ch; ++c) {
        const double inv = 1.0 / std::sqrt(run_var[c] + eps);
        const double* p = x.plane(i, c);
        double* q = y.plane(i, c);
        for (size_t s = 0; s < spatial; ++s)
          q[s] = gamma[c] * (p[s] - run_mean[c]) * inv + beta[c];
      }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
  check(!x_.empty(), "BatchNorm2d::backward without cached forward");
  if (identity) return gy;
  const Tensor& x = x_;
  Tensor gx(x.n(), x.c(), x.h(), x.w());
  const size_t spatial = static_cast<size_t>(x.h()) * x.w();
  const double m_count = static_cast<double>(x.n()) * spatial;
  for (int c = 0; c < ch; ++c) {
    const double inv = 1.0 / std::sqrt(var_[c] + eps);
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int i = 0; i < x.n(); ++i) {
      const double* g = gy.plane(i, c);
      const double* p = x.plane(i, c);
      for (size_t s = 0; s < spatial; ++s) {
        sum_gy += g[s];
        sum_gy_xhat += g[s] * (p[s] - mean_[c]) * inv;
      }
    }
    ggamma[c] += sum_gy_xhat;
    gbeta[c] += sum_gy;
    const double k1 = gamma[c] * inv;
    for (int i = 0; i < x.n(); ++i) {
      const double* g = gy.plane(i, c);
      const double* p = x.plane(i, c);
      double* o = gx.plane(i, c);
      for (size_t s = 0; s < spatial; ++s) {
        const double xhat = (p[s] - mean_[c]) * inv;
        o[s] = k1 * (g[s] - sum_gy / m_count - xhat * sum_gy_xhat / m_count);
      }
    }
  }
  return gx;
}

void BatchNorm2d::collect_params(const std::string& prefix,
                                 std::vector<ParamRef>* out) {
  out->push_back({prefix + ".gamma", &gamma, &ggamma, false});
  out->push_back({prefix + ".beta", &beta, &gbeta, false});
}

void BatchNorm2d::collect_buffers(const std::string& prefix,
                                  std::vector<ParamRef>* out) {
  out->push_back({prefix + ".run_mean", &run_mean, nullptr, false});
  out->push_back({prefix + ".run_var", &run_var, nullptr, false});
}

// --- ReLU --------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor y = x;
  if (train) mask_.assign(x.size(), 0);
  double* p = y.data();
  for (int64_t i = 0; i < y.size(); ++i) {
    if (p[i] > 0.0) {
      if (train) mask_[i] = 1;
    } else {
      p[i] = 0.0;
    }
  }
  return y;
}

Tensor ReLU::backward(const Tensor& gy) {
  check(mask_.size() == static_cast<size_t>(gy.size()),
        "ReLU::backward shape mismatch");
  Tensor gx = gy;
  double* p = gx.data();
  for (int64_t i = 0; i < gx.size(); ++i)
    if (!mask_[i]) p[i] = 0.0;
  return gx;
}

Mat ReLU::forward(const Mat& x, bool train) {
  Mat y = x;
  if (train) mask_.assign(x.size(), 0);
  double* p = y.data();
  for (int64_t i = 0; i < y.size(); ++i) {
    if (p[i] > 0.0) {
      if (train) mask_[i] = 1;
    } else {
      p[i] = 0.0;
    }
  }
  return y;
}

Mat ReLU::backward(const Mat& gy) {
  check(mask_.size() == static_cast<size_t>(gy.size()),
        "ReLU::backward shape mismatch");
  Mat gx = gy;
  double* p = gx.data();
  for (int64_t i = 0; i < gx.size(); ++i)
    if (!mask_[i]) p[i] = 0.0;
  return gx;
}

// --- MaxPool2d ---------------------------------------------------------------

Tensor MaxPool2d::forward(const Tensor& x, bool train) {
  const int oh = (x.h() - k) / stride + 1;
  const int ow = (x.w() - k) / stride + 1;
  check(oh > 0 && ow > 0, "MaxPool2d: input too small");
  Tensor y(x.n(), x.c(), oh, ow);
  if (train) {
    argmax_.assign(y.size(), 0);
    in_n = x.n();
    in_c = x.c();
    in_h = x.h();
    in_w = x.w();
  }
  int64_t oi = 0;
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.plane(i, c);
      double* q = y.plane(i, c);
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          double best = -1e300;
          int best_idx = 0;
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride + ky, ix = ox * stride + kx;
              const double v = p[static_cast<size_t>(iy) * x.w() + ix];
              if (v > best) {
                best = v;
                best_idx = iy * x.w() + ix;
              }
            }
          q[static_cast<size_t>(oy) * ow + ox] = best;
          if (train) argmax_[oi] = best_idx;
        }
    }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) {
  check(static_cast<size_t>(gy.size()) == argmax_.size(),
        "MaxPool2d::backward without matching forward");
  Tensor gx(in_n, in_c, in_h, in_w);
  int64_t oi = 0;
  for (int i = 0; i < gy.n(); ++i)
    for (int c = 0; c < gy.c(); ++c) {
      const double* g = gy.plane(i, c);
      double* o = gx.plane(i, c);
      const size_t spatial = static_cast<size_t>(gy.h()) * gy.w();
      for (size_t s = 0; s < spatial; ++s, ++oi) o[argmax_[oi]] += g[s];
    }
  return gx;
}

// --- GlobalMaxPool -----------------------------------------------------------

Mat GlobalMaxPool::forward(const Tensor& x, bool train) {
  Mat y(x.n(), x.c());
  if (train) {
    argmax_.assign(static_cast<size_t>(x.n()) * x.c(), 0);
    in_h = x.h();
    in_w = x.w();
  }
  const size_t spatial = static_cast<size_t>(x.h()) * x.w();
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.plane(i, c);
      double best = p[0];
      int best_idx = 0;
      for (size_t s = 1; s < spatial; ++s)
        if (p[s] > best) {
          best = p[s];
          best_idx = static_cast<int>(s);
        }
      y.at(i, c) = best;
      if (train) argmax_[static_cast<size_t>(i) * x.c() + c] = best_idx;
    }
  return y;
}

Tensor GlobalMaxPool::backward(const Mat& gy) {
  check(argmax_.size() == static_cast<size_t>(gy.size()),
        "GlobalMaxPool::backward without matching forward");
  Tensor gx(gy.rows(), gy.cols(), in_h, in_w);
  for (int i = 0; i < gy.rows(); ++i)
    for (int c = 0; c < gy.cols(); ++c)
      gx.plane(i, c)[argmax_[static_cast<size_t>(i) * gy.cols() + c]] +=
          gy.at(i, c);
  return gx;
}

// --- GlobalAvgPool -----------------------------------------------------------

Mat GlobalAvgPool::forward(const Tensor& x, bool train) {
  Mat y(x.n(), x.c());
  if (train) {
    in_h = x.h();
    in_w = x.w();
  }
  const size_t spatial = static_cast<size_t>(x.h()) * x.w();
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.plane(i, c);
      double s = 0.0;
      for (size_t q = 0; q < spatial; ++q) s += p[q];
      y.at(i, c) = s / static_cast<double>(spatial);
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Mat& gy) {
  Tensor gx(gy.rows(), gy.cols(), in_h, in_w);
  const double inv = 1.0 / (static_cast<double>(in_h) * in_w);
  for (int i = 0; i < gy.rows(); ++i)
    for (int c = 0; c < gy.cols(); ++c) {
      double* o = gx.plane(i, c);
      const double v = gy.at(i, c) * inv;
      const size_t spatial = static_cast<size_t>(in_h) * in_w;
      for (size_t s = 0; s < spatial; ++s) o[s] = v;
    }
  return gx;
}

// --- Linear ------------------------------------------------------------------

Linear::Linear(int in_d, int out_d) : in_dim(in_d), out_dim(out_d) {
  w.assign(static_cast<size_t>(out_dim) * in_dim, 0.0);
  b.assign(out_dim, 0.0);
  gw.assign(w.size(), 0.0);
  gb.assign(b.size(), 0.0);
}

void Linear::init(Rng& rng) {
  const double std = std::sqrt(2.0 / in_dim);
  for (auto& v : w) v = rng.normal() * std;
  std::fill(b.begin(), b.end(), 0.0);
}

Mat Linear::forward(const Mat& x, bool train) {
  check(x.cols() == in_dim, "Linear: expected " + std::to_string(in_dim) +
                                " inputs, got " + std::to_string(x.cols()));
  Mat y(x.rows(), out_dim);
  CMapMat X(x.data(), x.rows(), x.cols());
  CMapMat W(w.data(), out_dim, in_dim);
  MapMat Y(y.data(), y.rows(), y.cols());
  Y.noalias() = X * W.transpose();
  for (int i = 0; i < y.rows(); ++i)
    for (int j = 0; j < out_dim; ++j) y.at(i, j) += b[j];
  if (train) x_ = x;
  return y;
}

Mat Linear::backward(const Mat& gy) {
  check(!x_.empty(), "Linear::backward without cached forward");
  Mat gx(x_.rows(), in_dim);
  CMapMat GY(gy.data(), gy.rows(), gy.cols());
  CMapMat X(x_.data(), x_.rows(), x_.cols());
  CMapMat W(w.data(), out_dim, in_dim);
  MapMat GW(gw.data(), out_dim, in_dim);
  MapMat GX(gx.data(), gx.rows(), gx.cols());
  GW.noalias() += GY.transpose() * X;
  GX.noalias() = GY * W;
  for (int i = 0; i < gy.rows(); ++i)
    for (int j = 0; j < out_dim; ++j) gb[j] += gy.at(i, j);
  return gx;
}

void Linear::collect_params(const std::string& prefix, std::vector<ParamRef>* out) {
  out->push_back({prefix + ".w", &w, &gw, true});
  out->push_back({prefix + ".b", &b, &gb, false});
}

// --- Sigmoid -----------------------------------------------------------------

Mat Sigmoid::forward(const Mat& x, bool train) {
  Mat y(x.rows(), x.cols());
  for (int64_t i = 0; i < x.size(); ++i)
    y.data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  if (train) y_ = y;
  return y;
}

Mat Sigmoid::backward(const Mat& gy) {
  check(!y_.empty(), "Sigmoid::backward without cached forward");
  Mat gx(gy.rows(), gy.cols());
  for (int64_t i = 0; i < gy.size(); ++i) {
    const double s = y_.data()[i];
    gx.data()[i] = gy.data()[i] * s * (1.0 - s);
  }
  return gx;
}

// --- ConvBlock ---------------------------------------------------------------

ConvBlock::ConvBlock(int in_c, int out_c, int kernel, int stride, int groups)
    : conv(in_c, out_c, kernel, stride, groups), norm(out_c) {}

Tensor ConvBlock::forward(const Tensor& x, bool train) {
  return relu.forward(norm.forward(conv.forward(x, train), train), train);
}

Tensor ConvBlock::backward(const Tensor& gy) {
  return conv.backward(norm.backward(relu.backward(gy)));
}

void ConvBlock::init(Rng& rng) {
  conv.init(rng);
  norm.init(rng);
}

void ConvBlock::collect_params(const std::string& prefix,
                               std::vector<ParamRef>* out) {
  conv.collect_params(prefix + ".conv", out);
  norm.collect_params(prefix + ".norm", out);
}

void ConvBlock::collect_buffers(const std::string& prefix,
                                std::vector<ParamRef>* out) {
  norm.collect_buffers(prefix + ".norm", out);
}

// --- ChannelAttention --------------------------------------------------------

ChannelAttention::ChannelAttention(int channels, int hidden)
    : fc1(channels, hidden), fc2(hidden, channels) {}

void ChannelAttention::init(Rng& rng) {
  fc1.init(rng);
  fc2.init(rng);
  // bias the gate open at the start of training
  std::fill(fc2.b.begin(), fc2.b.end(), 2.0);
}

Tensor ChannelAttention::forward(const Tensor& x, bool train) {
  Mat g = gmp.forward(x, train);
  gate_ = sigmoid.forward(fc2.forward(relu.forward(fc1.forward(g, train), train), train), train);
  Tensor y(x.n(), x.c(), x.h(), x.w());
  const size_t spatial = static_cast<size_t>(x.h()) * x.w();
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c) {
      const double a = gate_.at(i, c);
      const double* p = x.plane(i, c);
      double* q = y.plane(i, c);
      for (size_t s = 0; s < spatial; ++s) q[s] = p[s] * a;
    }
  if (train) x_ = x;
  return y;
}

Tensor ChannelAttention::backward(const Tensor& gy) {
  check(!x_.empty(), "ChannelAttention::backward without cached forward");
  const Tensor& x = x_;
  const size_t spatial = static_cast<size_t>(x.h()) * x.w();
  // product rule: y = x * a(x)
  Mat ga(x.n(), x.c());
  Tensor gx(x.n(), x.c(), x.h(), x.w());
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c) {
      const double a = gate_.at(i, c);
      const double* g = gy.plane(i, c);
      const double* p = x.plane(i, c);
      double* o = gx.plane(i, c);
      double s = 0.0;
      for (size_t q = 0; q < spatial; ++q) {
        s += g[q] * p[q];
        o[q] = g[q] * a;
      }
      ga.at(i, c) = s;
    }
  Mat gg = fc1.backward(relu.backward(fc2.backward(sigmoid.backward(ga))));
  Tensor gx_pool = gmp.backward(gg);
  for (int64_t i = 0; i < gx.size(); ++i) gx.data()[i] += gx_pool.data()[i];
  return gx;
}

void ChannelAttention::collect_params(const std::string& prefix,
                                      std::vector<ParamRef>* out) {
  fc1.collect_params(prefix + ".fc1", out);
  fc2.collect_params(prefix + ".fc2", out);
}

}  // namespace fdfl::nn
