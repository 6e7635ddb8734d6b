#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "fdfl/freq.hpp"
#include "fdfl/nn.hpp"
#include "test_util.hpp"

using namespace fdfl;
using freq::FrequencyTensor;
using freq::ImageRGB;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Brute-force orthonormal DCT-II, written independently of the production
// separable implementation.
std::array<double, 64> naive_dct8x8(const double* x) {
  std::array<double, 64> out{};
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      const double au = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      const double av = v == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      double acc = 0.0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          acc += x[i * 8 + j] * std::cos((2 * i + 1) * u * kPi / 16.0) *
                 std::cos((2 * j + 1) * v * kPi / 16.0);
      out[u * 8 + v] = au * av * acc;
    }
  }
  return out;
}

std::vector<double> random_plane(nn::Rng& rng, int h, int w, double scale) {
  std::vector<double> p(static_cast<size_t>(h) * w);
  for (double& v : p) v = scale * rng.normal();
  return p;
}

FrequencyTensor random_tensor(nn::Rng& rng, int rows, int cols) {
  FrequencyTensor t;
  t.rows = rows;
  t.cols = cols;
  t.coeffs.resize(static_cast<size_t>(rows) * cols * freq::kChannels);
  for (double& v : t.coeffs) v = rng.normal();
  return t;
}

ImageRGB random_image(nn::Rng& rng, int size) {
  ImageRGB img;
  img.height = img.width = size;
  img.pixels.resize(static_cast<size_t>(size) * size * 3);
  for (double& v : img.pixels) v = 255.0 * rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("rgb_to_ycbcr known points and scalar oracle") {
  ImageRGB img;
  img.height = 1;
  img.width = 3;
  img.pixels = {0, 0, 0, 200, 200, 200, 255, 255, 255};
  const freq::ImageYCbCr ycc = freq::rgb_to_ycbcr(img);
  CHECK(ycc.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ycc.at(0, 0, 1) == doctest::Approx(128.0).epsilon(1e-12));
  CHECK(ycc.at(0, 0, 2) == doctest::Approx(128.0).epsilon(1e-12));
  // achromatic: Y = v, chroma stays at the offset
  CHECK(ycc.at(0, 1, 0) == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(ycc.at(0, 1, 1) == doctest::Approx(128.0).epsilon(1e-12));
  CHECK(ycc.at(0, 2, 0) == doctest::Approx(255.0).epsilon(1e-12));

  nn::Rng rng(11);
  ImageRGB rnd;
  rnd.height = 1;
  rnd.width = 1000;
  rnd.pixels.resize(3000);
  for (double& v : rnd.pixels) v = 255.0 * rng.uniform();
  const freq::ImageYCbCr out = freq::rgb_to_ycbcr(rnd);
  for (int x = 0; x < 1000; ++x) {
    const double r = rnd.at(0, x, 0), g = rnd.at(0, x, 1), b = rnd.at(0, x, 2);
    CHECK(out.at(0, x, 0) ==
          doctest::Approx(0.299 * r + 0.587 * g + 0.114 * b).epsilon(1e-9));
    CHECK(out.at(0, x, 1) ==
          doctest::Approx(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b)
              .epsilon(1e-9));
    CHECK(out.at(0, x, 2) ==
          doctest::Approx(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b)
              .epsilon(1e-9));
  }
}

TEST_CASE("block_dct2d constant and zero blocks") {
  std::vector<double> plane(64, 3.25);
  const std::vector<double> c = freq::block_dct2d(plane, 8, 8);
  CHECK(c[0] == doctest::Approx(8.0 * 3.25).epsilon(1e-12));
  for (int i = 1; i < 64; ++i) CHECK(std::abs(c[i]) < 1e-12);

  const std::vector<double> zeros(64 * 4, 0.0);
  for (double v : freq::block_dct2d(zeros, 16, 16)) CHECK(v == 0.0);
}

TEST_CASE("block_dct2d rejects non-multiple-of-8 dims") {
  std::vector<double> plane(12 * 8, 0.0);
  CHECK_THROWS(freq::block_dct2d(plane, 12, 8));
  CHECK_THROWS(freq::block_dct2d(plane, 8, 12));
}

TEST_CASE("block_dct2d matches the naive double-sum oracle") {
  nn::Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> block = random_plane(rng, 8, 8, 100.0);
    const std::vector<double> got = freq::block_dct2d(block, 8, 8);
    const std::array<double, 64> want = naive_dct8x8(block.data());
    for (int i = 0; i < 64; ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
  }

  // multi-block plane: every block lands at its own position
  const int h = 16, w = 24;
  std::vector<double> plane = random_plane(rng, h, w, 50.0);
  const std::vector<double> coeffs = freq::block_dct2d(plane, h, w);
  for (int bi = 0; bi < h / 8; ++bi) {
    for (int bj = 0; bj < w / 8; ++bj) {
      double block[64];
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          block[i * 8 + j] = plane[(bi * 8 + i) * w + (bj * 8 + j)];
      const std::array<double, 64> want = naive_dct8x8(block);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v)
          CHECK(coeffs[(bi * 8 + u) * w + (bj * 8 + v)] ==
                doctest::Approx(want[u * 8 + v]).epsilon(1e-10));
    }
  }
}

TEST_CASE("block_dct2d preserves energy and inverts") {
  nn::Rng rng(7);
  const int h = 32, w = 40;
  const std::vector<double> plane = random_plane(rng, h, w, 80.0);
  const std::vector<double> coeffs = freq::block_dct2d(plane, h, w);

  for (int bi = 0; bi < h / 8; ++bi) {
    for (int bj = 0; bj < w / 8; ++bj) {
      double ex = 0.0, ec = 0.0;
      for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
          const double p = plane[(bi * 8 + i) * w + (bj * 8 + j)];
          const double c = coeffs[(bi * 8 + i) * w + (bj * 8 + j)];
          ex += p * p;
          ec += c * c;
        }
      }
      CHECK(ec == doctest::Approx(ex).epsilon(1e-6));
    }
  }

  const std::vector<double> back = freq::block_idct2d(coeffs, h, w);
  for (size_t i = 0; i < plane.size(); ++i)
    CHECK(std::abs(back[i] - plane[i]) < 1e-6);
}

TEST_CASE("adding a scaled DCT basis patch moves exactly one coefficient") {
  // the synthetic forgery generator relies on this identity
  nn::Rng rng(3);
  std::vector<double> base = random_plane(rng, 8, 8, 30.0);
  const std::vector<double> before = freq::block_dct2d(base, 8, 8);
  const int u = 2, v = 3;
  const double amp = 17.5;
  const double au = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
  const double av = v == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      base[i * 8 + j] += amp * au * av *
                         std::cos((2 * i + 1) * u * kPi / 16.0) *
                         std::cos((2 * j + 1) * v * kPi / 16.0);
  const std::vector<double> after = freq::block_dct2d(base, 8, 8);
  for (int k = 0; k < 64; ++k) {
    const double delta = after[k] - before[k];
    if (k == u * 8 + v)
      CHECK(delta == doctest::Approx(amp).epsilon(1e-9));
    else
      CHECK(std::abs(delta) < 1e-9);
  }
}

TEST_CASE("regroup index arithmetic, shape and bijection") {
  nn::Rng rng(5);
  const int h = 64, w = 64;
  const std::vector<double> y = random_plane(rng, h, w, 1.0);
  const std::vector<double> cb = random_plane(rng, h, w, 1.0);
  const std::vector<double> cr = random_plane(rng, h, w, 1.0);
  const FrequencyTensor t = freq::regroup(y, cb, cr, h, w);
  CHECK(t.rows == 8);
  CHECK(t.cols == 8);
  CHECK(t.coeffs.size() == 8u * 8u * 192u);

  // Y-plane block (2,5), coefficient (1,3) -> channel 0*64 + 1*8 + 3 = 11
  CHECK(t.at(2, 5, 11) == y[(2 * 8 + 1) * w + (5 * 8 + 3)]);
  // Cb block (0,0) coefficient (0,0) -> channel 64; Cr -> channel 128
  CHECK(t.at(0, 0, 64) == cb[0]);
  CHECK(t.at(0, 0, 128) == cr[0]);

  const std::array<std::vector<double>, 3> planes = freq::inverse_regroup(t);
  CHECK(planes[0] == y);
  CHECK(planes[1] == cb);
  CHECK(planes[2] == cr);
}

TEST_CASE("regroup channels are plane-separated") {
  nn::Rng rng(6);
  const int h = 24, w = 16;
  const std::vector<double> y = random_plane(rng, h, w, 1.0);
  const std::vector<double> cb = random_plane(rng, h, w, 1.0);
  const std::vector<double> cr = random_plane(rng, h, w, 1.0);
  const FrequencyTensor base = freq::regroup(y, cb, cr, h, w);

  for (int p = 0; p < 3; ++p) {
    std::array<std::vector<double>, 3> planes = {y, cb, cr};
    planes[p][static_cast<size_t>(11) * w + 5] += 1.0;  // block (1,0), coeff (3,5)
    const FrequencyTensor t = freq::regroup(planes[0], planes[1], planes[2], h, w);
    int changed = 0;
    for (int i = 0; i < t.rows; ++i) {
      for (int j = 0; j < t.cols; ++j) {
        for (int c = 0; c < freq::kChannels; ++c) {
          if (t.at(i, j, c) != base.at(i, j, c)) {
            ++changed;
            CHECK(c / 64 == p);
            CHECK(i == 1);
            CHECK(j == 0);
            CHECK(c % 64 == 3 * 8 + 5);
          }
        }
      }
    }
    CHECK(changed == 1);
  }
}

TEST_CASE("channel stats: floor, two-point mean, two-pass oracle, merge") {
  // zero-variance channel floors at epsilon_std
  FrequencyTensor flat;
  flat.rows = flat.cols = 2;
  flat.coeffs.assign(4 * freq::kChannels, 0.0);
  for (int cell = 0; cell < 4; ++cell) flat.coeffs[cell * freq::kChannels + 7] = 4.5;
  freq::StatsAccumulator acc0;
  acc0.add(flat);
  const freq::ChannelStats s0 = acc0.finalize();
  CHECK(s0.mean[7] == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(s0.std[7] == freq::kEpsilonStd);
  CHECK(s0.count == 1);

  // two tensors with channel values {0} and {2} -> mean 1
  FrequencyTensor a = flat, b = flat;
  for (int cell = 0; cell < 4; ++cell) {
    a.coeffs[cell * freq::kChannels + 3] = 0.0;
    b.coeffs[cell * freq::kChannels + 3] = 2.0;
  }
  freq::StatsAccumulator acc1;
  acc1.add(a);
  acc1.add(b);
  CHECK(acc1.finalize().mean[3] == doctest::Approx(1.0).epsilon(1e-12));

  // random corpus vs a two-pass batch computation
  nn::Rng rng(9);
  std::vector<FrequencyTensor> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(random_tensor(rng, 3, 4));
  freq::StatsAccumulator single;
  for (const auto& t : corpus) single.add(t);
  const freq::ChannelStats got = single.finalize();
  CHECK(single.images() == 10);

  const size_t cells_per = 3 * 4;
  const double n = 10.0 * cells_per;
  for (int c = 0; c < freq::kChannels; ++c) {
    double mean = 0.0;
    for (const auto& t : corpus)
      for (size_t cell = 0; cell < cells_per; ++cell)
        mean += t.coeffs[cell * freq::kChannels + c];
    mean /= n;
    double var = 0.0;
    for (const auto& t : corpus)
      for (size_t cell = 0; cell < cells_per; ++cell) {
        const double d = t.coeffs[cell * freq::kChannels + c] - mean;
        var += d * d;
      }
    var /= n;
    CHECK(got.mean[c] == doctest::Approx(mean).epsilon(1e-7));
    CHECK(got.std[c] == doctest::Approx(std::sqrt(var)).epsilon(1e-7));
  }

  // sharded accumulation merged equals the single pass
  freq::StatsAccumulator left, right;
  for (int i = 0; i < 10; ++i) (i < 4 ? left : right).add(corpus[i]);
  left.merge(right);
  const freq::ChannelStats merged = left.finalize();
  CHECK(merged.count == 10);
  for (int c = 0; c < freq::kChannels; ++c) {
    CHECK(merged.mean[c] == doctest::Approx(got.mean[c]).epsilon(1e-7));
    CHECK(merged.std[c] == doctest::Approx(got.std[c]).epsilon(1e-7));
  }

  freq::StatsAccumulator empty;
  CHECK_THROWS(empty.finalize());
}

TEST_CASE("normalize: centering, identity stats, guards") {
  nn::Rng rng(13);
  freq::ChannelStats stats;
  stats.count = 1;
  stats.mean.resize(freq::kChannels);
  stats.std.resize(freq::kChannels);
  for (int c = 0; c < freq::kChannels; ++c) {
    stats.mean[c] = rng.normal();
    stats.std[c] = 0.5 + rng.uniform();
  }

  FrequencyTensor t;
  t.rows = t.cols = 2;
  t.coeffs.resize(4 * freq::kChannels);
  for (int cell = 0; cell < 4; ++cell)
    for (int c = 0; c < freq::kChannels; ++c)
      t.coeffs[cell * freq::kChannels + c] = stats.mean[c];
  const FrequencyTensor centered = freq::normalize(t, stats);
  CHECK(centered.normalized);
  for (double v : centered.coeffs) CHECK(std::abs(v) < 1e-12);

  freq::ChannelStats id;
  id.count = 1;
  id.mean.assign(freq::kChannels, 0.0);
  id.std.assign(freq::kChannels, 1.0);
  FrequencyTensor r = random_tensor(rng, 2, 2);
  const FrequencyTensor same = freq::normalize(r, id);
  CHECK(same.coeffs == r.coeffs);

  CHECK_THROWS(freq::normalize(same, id));  // double normalization
  freq::ChannelStats bad = id;
  bad.mean.resize(10);
  CHECK_THROWS(freq::normalize(r, bad));

  // a corpus normalized by its own stats has per-channel mean ~0
  std::vector<FrequencyTensor> corpus;
  freq::StatsAccumulator acc;
  for (int i = 0; i < 6; ++i) {
    corpus.push_back(random_tensor(rng, 3, 3));
    acc.add(corpus.back());
  }
  const freq::ChannelStats own = acc.finalize();
  std::vector<double> mean(freq::kChannels, 0.0);
  for (const auto& x : corpus) {
    const FrequencyTensor nx = freq::normalize(x, own);
    for (size_t cell = 0; cell < 9; ++cell)
      for (int c = 0; c < freq::kChannels; ++c)
        mean[c] += nx.coeffs[cell * freq::kChannels + c];
  }
  for (int c = 0; c < freq::kChannels; ++c)
    CHECK(std::abs(mean[c] / (6 * 9)) < 1e-6);
}

TEST_CASE("preprocess_image shape, null image and composition") {
  nn::Rng rng(21);
  const ImageRGB big = random_image(rng, 256);
  const FrequencyTensor t = freq::preprocess_image(big);
  CHECK(t.rows == 32);
  CHECK(t.cols == 32);
  CHECK(t.coeffs.size() == 32u * 32u * 192u);
  CHECK_FALSE(t.normalized);

  ImageRGB black;
  black.height = black.width = 16;
  black.pixels.assign(16 * 16 * 3, 0.0);
  for (double v : freq::preprocess_image(black).coeffs) CHECK(std::abs(v) < 1e-9);

  // equals the manual pipeline: color convert, center chroma, DCT, regroup
  const ImageRGB img = random_image(rng, 32);
  const freq::ImageYCbCr ycc = freq::rgb_to_ycbcr(img);
  std::array<std::vector<double>, 3> coeffs;
  for (int p = 0; p < 3; ++p) {
    std::vector<double> plane(32 * 32);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        plane[y * 32 + x] = ycc.at(y, x, p) - (p == 0 ? 0.0 : 128.0);
    coeffs[p] = freq::block_dct2d(plane, 32, 32);
  }
  const FrequencyTensor manual = freq::regroup(coeffs[0], coeffs[1], coeffs[2], 32, 32);
  const FrequencyTensor direct = freq::preprocess_image(img);
  CHECK(direct.coeffs == manual.coeffs);

  ImageRGB odd;
  odd.height = odd.width = 12;
  odd.pixels.assign(12 * 12 * 3, 0.0);
  CHECK_THROWS(freq::preprocess_image(odd));
}

TEST_CASE("stats file and tensor cache round-trip") {
  nn::Rng rng(31);
  freq::StatsAccumulator acc;
  acc.add(random_tensor(rng, 2, 3));
  acc.add(random_tensor(rng, 2, 3));
  const freq::ChannelStats s = acc.finalize();

  const std::string dir = testutil::scratch_dir("freq_io");
  freq::save_stats(s, dir + "/stats.json");
  const freq::ChannelStats r = freq::load_stats(dir + "/stats.json");
  CHECK(r.count == s.count);
  CHECK(r.mean == s.mean);  // json round-trips doubles exactly
  CHECK(r.std == s.std);

  const FrequencyTensor t = random_tensor(rng, 3, 2);
  freq::save_tensor_cache(t, dir + "/t.bin");
  FrequencyTensor back;
  REQUIRE(freq::load_tensor_cache(dir + "/t.bin", &back));
  CHECK(back.rows == t.rows);
  CHECK(back.cols == t.cols);
  for (size_t i = 0; i < t.coeffs.size(); ++i)
    CHECK(back.coeffs[i] == static_cast<double>(static_cast<float>(t.coeffs[i])));

  FrequencyTensor none;
  CHECK_FALSE(freq::load_tensor_cache(dir + "/missing.bin", &none));
}
