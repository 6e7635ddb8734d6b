#include "fdfl/freq.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace fdfl::freq {
namespace {

using json = nlohmann::json;

// Orthonormal DCT-II basis: M[u][x] = c_u * cos((2x+1) u pi / 16),
// c_0 = sqrt(1/8), c_u = sqrt(2/8) otherwise.
const std::array<std::array<double, kBlock>, kBlock>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, kBlock>, kBlock> m{};
    const double pi = std::acos(-1.0);
    for (int u = 0; u < kBlock; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int x = 0; x < kBlock; ++x)
        m[u][x] = cu * std::cos((2 * x + 1) * u * pi / (2.0 * kBlock));
    }
    return m;
  }();
  return basis;
}

void require_block_dims(int h, int w) {
  check(h > 0 && w > 0 && h % kBlock == 0 && w % kBlock == 0,
        "plane dims must be positive multiples of 8, got " +
            std::to_string(h) + "x" + std::to_string(w));
}

// tmp = M * B (forward) or M^T * B (inverse), then out = tmp * M^T / tmp * M.
void transform_block(const double* in, double* out, int stride, bool inverse) {
  const auto& m = dct_basis();
  double tmp[kBlock][kBlock];
  for (int u = 0; u < kBlock; ++u) {
    for (int y = 0; y < kBlock; ++y) {
      double s = 0.0;
      for (int x = 0; x < kBlock; ++x)
        s += (inverse ? m[x][u] : m[u][x]) * in[x * stride + y];
      tmp[u][y] = s;
    }
  }
  for (int u = 0; u < kBlock; ++u) {
    for (int v = 0; v < kBlock; ++v) {
      double s = 0.0;
      for (int y = 0; y < kBlock; ++y)
        s += tmp[u][y] * (inverse ? m[y][v] : m[v][y]);
      out[u * stride + v] = s;
    }
  }
}

std::vector<double> blockwise(const std::vector<double>& plane, int h, int w,
                              bool inverse) {
  require_block_dims(h, w);
  check(plane.size() == static_cast<size_t>(h) * w, "plane size mismatch");
  std::vector<double> out(plane.size());
  for (int by = 0; by < h; by += kBlock)
    for (int bx = 0; bx < w; bx += kBlock)
      transform_block(&plane[static_cast<size_t>(by) * w + bx],
                      &out[static_cast<size_t>(by) * w + bx], w, inverse);
  return out;
}

}  // namespace

ImageYCbCr rgb_to_ycbcr(const ImageRGB& img) {
  check(img.pixels.size() == static_cast<size_t>(img.height) * img.width * 3,
        "ImageRGB buffer size mismatch");
  ImageYCbCr out;
  out.height = img.height;
  out.width = img.width;
  out.planes.resize(img.pixels.size());
  const double* p = img.pixels.data();
  double* q = out.planes.data();
  const size_t n = static_cast<size_t>(img.height) * img.width;
  for (size_t i = 0; i < n; ++i, p += 3, q += 3) {
    const double r = p[0], g = p[1], b = p[2];
    q[0] = 0.299 * r + 0.587 * g + 0.114 * b;
    q[1] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    q[2] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
  }
  return out;
}

std::vector<double> block_dct2d(const std::vector<double>& plane, int h, int w) {
  return blockwise(plane, h, w, /*inverse=*/false);
}

std::vector<double> block_idct2d(const std::vector<double>& coeffs, int h, int w) {
  return blockwise(coeffs, h, w, /*inverse=*/true);
}

FrequencyTensor regroup(const std::vector<double>& y_coeffs,
                        const std::vector<double>& cb_coeffs,
                        const std::vector<double>& cr_coeffs, int h, int w) {
  require_block_dims(h, w);
  const size_t expect = static_cast<size_t>(h) * w;
  check(y_coeffs.size() == expect && cb_coeffs.size() == expect &&
            cr_coeffs.size() == expect,
        "regroup: coefficient planes must share dims");
  FrequencyTensor t;
  t.rows = h / kBlock;
  t.cols = w / kBlock;
  t.coeffs.resize(static_cast<size_t>(t.rows) * t.cols * kChannels);
  const std::vector<double>* planes[3] = {&y_coeffs, &cb_coeffs, &cr_coeffs};
  for (int p = 0; p < 3; ++p) {
    const auto& src = *planes[p];
    for (int i = 0; i < t.rows; ++i)
      for (int j = 0; j < t.cols; ++j)
        for (int u = 0; u < kBlock; ++u)
          for (int v = 0; v < kBlock; ++v)
            t.at(i, j, p * kBandsPerPlane + u * kBlock + v) =
                src[(static_cast<size_t>(i) * kBlock + u) * w + j * kBlock + v];
  }
  return t;
}

std::array<std::vector<double>, 3> inverse_regroup(const FrequencyTensor& t) {
  const int h = t.rows * kBlock, w = t.cols * kBlock;
  std::array<std::vector<double>, 3> planes;
  for (int p = 0; p < 3; ++p) {
    planes[p].resize(static_cast<size_t>(h) * w);
    for (int i = 0; i < t.rows; ++i)
      for (int j = 0; j < t.cols; ++j)
        for (int u = 0; u < kBlock; ++u)
          for (int v = 0; v < kBlock; ++v)
            planes[p][(static_cast<size_t>(i) * kBlock + u) * w + j * kBlock + v] =
                t.at(i, j, p * kBandsPerPlane + u * kBlock + v);
  }
  return planes;
}

StatsAccumulator::StatsAccumulator() {
  mean_.fill(0.0);
  m2_.fill(0.0);
}

void StatsAccumulator::add(const FrequencyTensor& t) {
  check(!t.normalized, "stats must be computed on unnormalized tensors");
  const size_t cells = static_cast<size_t>(t.rows) * t.cols;
  for (size_t cell = 0; cell < cells; ++cell) {
    const double* x = &t.coeffs[cell * kChannels];
    const double n1 = static_cast<double>(++n_);
    for (int c = 0; c < kChannels; ++c) {
      const double d = x[c] - mean_[c];
      mean_[c] += d / n1;
      m2_[c] += d * (x[c] - mean_[c]);
    }
  }
  ++images_;
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double nab = na + nb;
  for (int c = 0; c < kChannels; ++c) {
    const double delta = other.mean_[c] - mean_[c];
    mean_[c] += delta * nb / nab;
    m2_[c] += other.m2_[c] + delta * delta * na * nb / nab;
  }
  n_ += other.n_;
  images_ += other.images_;
}

ChannelStats StatsAccumulator::finalize() const {
  check(images_ >= 1, "channel stats require at least one image");
  ChannelStats s;
  s.count = images_;
  s.mean.assign(mean_.begin(), mean_.end());
  s.std.resize(kChannels);
  for (int c = 0; c < kChannels; ++c)
    s.std[c] = std::max(std::sqrt(m2_[c] / static_cast<double>(n_)), kEpsilonStd);
  return s;
}

FrequencyTensor normalize(const FrequencyTensor& t, const ChannelStats& stats) {
  check(!t.normalized, "tensor already normalized");
  check(stats.count >= 1, "channel stats are empty");
  check(stats.mean.size() == kChannels && stats.std.size() == kChannels,
        "channel stats must have 192 channels");
  FrequencyTensor out = t;
  const size_t cells = static_cast<size_t>(t.rows) * t.cols;
  for (size_t cell = 0; cell < cells; ++cell) {
    double* x = &out.coeffs[cell * kChannels];
    for (int c = 0; c < kChannels; ++c)
      x[c] = (x[c] - stats.mean[c]) / stats.std[c];
  }
  out.normalized = true;
  return out;
}

FrequencyTensor preprocess_image(const ImageRGB& img, const ChannelStats* stats) {
  require_block_dims(img.height, img.width);
  const ImageYCbCr ycc = rgb_to_ycbcr(img);
  const size_t n = static_cast<size_t>(img.height) * img.width;
  std::vector<double> plane(n);
  std::array<std::vector<double>, 3> coeffs;
  for (int p = 0; p < 3; ++p) {
    // JPEG-style level shift on chroma so a black image maps to the zero
    // tensor; normalization absorbs the constant either way.
    const double shift = p == 0 ? 0.0 : 128.0;
    for (size_t i = 0; i < n; ++i) plane[i] = ycc.planes[i * 3 + p] - shift;
    coeffs[p] = block_dct2d(plane, img.height, img.width);
  }
  FrequencyTensor t =
      regroup(coeffs[0], coeffs[1], coeffs[2], img.height, img.width);
  if (stats) t = normalize(t, *stats);
  return t;
}

void save_stats(const ChannelStats& stats, const std::string& path) {
  json j;
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  j["count"] = stats.count;
  j["layout"] = "plane_major_uv";
  std::ofstream f(path);
  check(f.good(), "cannot open stats file for writing: " + path);
  f << j.dump(2) << "\n";
}

ChannelStats load_stats(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open stats file: " + path);
  json j = json::parse(f);
  check(j.value("layout", "") == "plane_major_uv",
        "unsupported stats layout in " + path);
  ChannelStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.count = j.at("count").get<int64_t>();
  check(s.mean.size() == kChannels && s.std.size() == kChannels,
        "stats file must carry 192 channels: " + path);
  return s;
}

void save_tensor_cache(const FrequencyTensor& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), "cannot open cache file for writing: " + path);
  std::vector<float> buf(t.coeffs.size());
  for (size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<float>(t.coeffs[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  json side;
  side["shape"] = {t.rows, t.cols, kChannels};
  side["dtype"] = "float32_le";
  side["normalized"] = t.normalized;
  std::ofstream s(path + ".json");
  s << side.dump() << "\n";
}

bool load_tensor_cache(const std::string& path, FrequencyTensor* out) {
  std::ifstream s(path + ".json");
  if (!s.good()) return false;
  json side;
  try {
    side = json::parse(s);
  } catch (const json::exception&) {
    return false;
  }
  auto shape = side.value("shape", std::vector<int>{});
  if (shape.size() != 3 || shape[2] != kChannels) return false;
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) return false;
  const size_t n = static_cast<size_t>(shape[0]) * shape[1] * shape[2];
  std::vector<float> buf(n);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<size_t>(f.gcount()) != n * sizeof(float)) return false;
  out->rows = shape[0];
  out->cols = shape[1];
  out->coeffs.assign(buf.begin(), buf.end());
  out->normalized = side.value("normalized", false);
  return true;
}

}  // namespace fdfl::freq
