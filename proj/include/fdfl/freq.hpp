#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fdfl/tensor.hpp"

namespace fdfl::freq {

inline constexpr int kBlock = 8;
inline constexpr int kBandsPerPlane = kBlock * kBlock;  // 64
inline constexpr int kChannels = 3 * kBandsPerPlane;    // 192
inline constexpr double kEpsilonStd = 1e-6;

// H x W x 3 interleaved, intensities in [0, 255].
struct ImageRGB {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // size H*W*3

  double at(int y, int x, int ch) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + ch];
  }
  double& at(int y, int x, int ch) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + ch];
  }
};

// Same layout; plane 0 = Y in [0,255], planes 1/2 = Cb/Cr centered at 128.
struct ImageYCbCr {
  int height = 0;
  int width = 0;
  std::vector<double> planes;  // size H*W*3, interleaved (Y, Cb, Cr)

  double at(int y, int x, int p) const {
    return planes[(static_cast<size_t>(y) * width + x) * 3 + p];
  }
  double& at(int y, int x, int p) {
    return planes[(static_cast<size_t>(y) * width + x) * 3 + p];
  }
};

// (H/8) x (W/8) x 192 channels-last array of per-band DCT coefficients.
// Channel layout is plane-major: c = p*64 + u*8 + v with p in {Y,Cb,Cr}.
struct FrequencyTensor {
  int rows = 0;  // H/8
  int cols = 0;  // W/8
  std::vector<double> coeffs;  // size rows*cols*192
  bool normalized = false;

  double at(int i, int j, int c) const {
    return coeffs[(static_cast<size_t>(i) * cols + j) * kChannels + c];
  }
  double& at(int i, int j, int c) {
    return coeffs[(static_cast<size_t>(i) * cols + j) * kChannels + c];
  }
};

struct ChannelStats {
  std::vector<double> mean;  // 192
  std::vector<double> std;   // 192, floored at kEpsilonStd
  int64_t count = 0;         // images accumulated
};

// Streaming per-channel moments (Welford), mergeable so stats computation can
// shard the corpus. Positions of all spatial cells of all tensors are pooled.
class StatsAccumulator {
 public:
  StatsAccumulator();
  void add(const FrequencyTensor& t);
  void merge(const StatsAccumulator& other);
  ChannelStats finalize() const;  // throws if no image was accumulated
  int64_t images() const { return images_; }

 private:
  int64_t images_ = 0;
  int64_t n_ = 0;  // spatial positions accumulated (per channel)
  std::array<double, kChannels> mean_;
  std::array<double, kChannels> m2_;
};

// Full-range JPEG (BT.601) conversion, Cb/Cr offset 128.
ImageYCbCr rgb_to_ycbcr(const ImageRGB& img);

// Orthonormal 2D DCT-II on every non-overlapping 8x8 block; coefficient (u,v)
// stored at block-local position (u,v). Throws if dims are not multiples of 8.
std::vector<double> block_dct2d(const std::vector<double>& plane, int h, int w);
// Exact inverse of block_dct2d.
std::vector<double> block_idct2d(const std::vector<double>& coeffs, int h, int w);

// out[i,j,p*64+u*8+v] = coefficient (u,v) of block (i,j) of plane p.
FrequencyTensor regroup(const std::vector<double>& y_coeffs,
                        const std::vector<double>& cb_coeffs,
                        const std::vector<double>& cr_coeffs, int h, int w);
// Inverse mapping of regroup, returns the three coefficient planes.
std::array<std::vector<double>, 3> inverse_regroup(const FrequencyTensor& t);

// (x - mean) / std per channel; rejects double normalization.
FrequencyTensor normalize(const FrequencyTensor& t, const ChannelStats& stats);

// rgb_to_ycbcr -> per-plane block_dct2d -> regroup -> normalize (if stats).
FrequencyTensor preprocess_image(const ImageRGB& img,
                                 const ChannelStats* stats = nullptr);

// Stats file: {"mean": [...], "std": [...], "count": n, "layout": "plane_major_uv"}
void save_stats(const ChannelStats& stats, const std::string& path);
ChannelStats load_stats(const std::string& path);

// Raw little-endian float32 cache with a JSON sidecar giving the shape.
void save_tensor_cache(const FrequencyTensor& t, const std::string& path);
bool load_tensor_cache(const std::string& path, FrequencyTensor* out);

}  // namespace fdfl::freq
