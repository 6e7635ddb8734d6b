#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdfl {

// Dense 4-d array in NCHW order, double precision. All model math runs on
// these; batch-of-vector quantities (embeddings, logits) use Mat below.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w)
      : n_(n), c_(c), h_(h), w_(w),
        v_(static_cast<size_t>(n) * c * h * w, 0.0) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("Tensor: negative dimension");
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& at(int i, int j, int y, int x) {
    return v_[offset(i, j, y, x)];
  }
  double at(int i, int j, int y, int x) const {
    return v_[offset(i, j, y, x)];
  }

  // Pointer to the (i, j) spatial plane.
  double* plane(int i, int j) { return v_.data() + offset(i, j, 0, 0); }
  const double* plane(int i, int j) const {
    return v_.data() + offset(i, j, 0, 0);
  }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  std::string shape_str() const {
    return std::to_string(n_) + "x" + std::to_string(c_) + "x" +
           std::to_string(h_) + "x" + std::to_string(w_);
  }

  void fill(double v) { std::fill(v_.begin(), v_.end(), v); }

 private:
  size_t offset(int i, int j, int y, int x) const {
    return ((static_cast<size_t>(i) * c_ + j) * h_ + y) * w_ + x;
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> v_;
};

// Row-major matrix, used for embeddings (B x D), logits (B x 2) and linear
// layer I/O.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols)
      : rows_(rows), cols_(cols),
        v_(static_cast<size_t>(rows) * cols, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double* row(int i) { return v_.data() + static_cast<size_t>(i) * cols_; }
  const double* row(int i) const {
    return v_.data() + static_cast<size_t>(i) * cols_;
  }

  double& at(int i, int j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
  double at(int i, int j) const {
    return v_[static_cast<size_t>(i) * cols_ + j];
  }

  void fill(double v) { std::fill(v_.begin(), v_.end(), v); }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Raised on malformed configs / CLI input; mapped to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fdfl
