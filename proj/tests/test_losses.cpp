#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fdfl/losses.hpp"
#include "fdfl/nn.hpp"

using namespace fdfl;
using losses::EmbeddingBatch;
using losses::SclConfig;
using losses::SclForwardResult;

namespace {

double dist(const double* a, const double* b, int d) {
  double acc = 0.0;
  for (int j = 0; j < d; ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(acc);
}

// Direct transcription of the loss definition, kept separate from the
// implementation on purpose.
double scl_reference(const EmbeddingBatch& batch, const std::vector<double>& c,
                     double m) {
  const int d = batch.dim();
  double m_nat = 0.0, m_man = 0.0;
  int s = 0, t = 0;
  for (int i = 0; i < batch.batch(); ++i) {
    const double r = dist(batch.vectors.row(i), c.data(), d);
    if (batch.labels[i] == 0) {
      m_nat += r;
      ++s;
    } else {
      m_man += r;
      ++t;
    }
  }
  if (s == 0 || t == 0) return 0.0;
  m_nat /= s;
  m_man /= t;
  return m_nat + std::max(m_nat - m_man + m * std::sqrt(double(d)), 0.0);
}

EmbeddingBatch random_batch(nn::Rng& rng, int b, int d, double spread = 1.0) {
  EmbeddingBatch batch;
  batch.vectors = Mat(b, d);
  for (int64_t i = 0; i < batch.vectors.size(); ++i)
    batch.vectors.data()[i] = spread * rng.normal();
  batch.labels.resize(b);
  for (int i = 0; i < b; ++i) batch.labels[i] = i < b / 2 ? 0 : 1;
  return batch;
}

std::vector<double> random_center(nn::Rng& rng, int d) {
  std::vector<double> c(d);
  for (double& v : c) v = rng.normal();
  return c;
}

}  // namespace

TEST_CASE("scl closed forms hold exactly") {
  const int d = 4;
  SclConfig cfg;
  cfg.m = 0.5;  // m*sqrt(D) = 1.0
  std::vector<double> center = {0.3, -0.2, 1.1, 0.4};

  // two naturals at C, one manipulated at distance 2
  EmbeddingBatch batch;
  batch.vectors = Mat(3, d);
  batch.labels = {0, 0, 1};
  for (int j = 0; j < d; ++j) {
    batch.vectors.at(0, j) = center[j];
    batch.vectors.at(1, j) = center[j];
    batch.vectors.at(2, j) = center[j];
  }
  batch.vectors.at(2, 0) += 2.0;
  SclForwardResult fwd = losses::scl_forward(batch, center, cfg);
  CHECK(fwd.active);
  CHECK(fwd.s == 2);
  CHECK(fwd.t == 1);
  CHECK(std::abs(fwd.m_nat) <= 1e-12);
  CHECK(std::abs(fwd.m_man - 2.0) <= 1e-12);
  CHECK(std::abs(fwd.hinge_arg - (-1.0)) <= 1e-12);
  CHECK(std::abs(fwd.loss) <= 1e-12);

  // the manipulated gradient vanishes when the hinge is off
  Mat ge;
  std::vector<double> gc;
  losses::scl_backward(batch, center, cfg, fwd, &ge, &gc);
  for (int j = 0; j < d; ++j) CHECK(ge.at(2, j) == 0.0);

  // natural and manipulated both at distance a=3: L = a + m*sqrt(D)
  const double a = 3.0;
  EmbeddingBatch eq;
  eq.vectors = Mat(2, d);
  eq.labels = {0, 1};
  for (int j = 0; j < d; ++j) {
    eq.vectors.at(0, j) = center[j];
    eq.vectors.at(1, j) = center[j];
  }
  eq.vectors.at(0, 1) += a;
  eq.vectors.at(1, 3) -= a;
  fwd = losses::scl_forward(eq, center, cfg);
  CHECK(std::abs(fwd.loss - (a + 1.0)) <= 1e-12);
  CHECK(std::abs(fwd.hinge_arg - 1.0) <= 1e-12);
}

TEST_CASE("scl matches an independent expression on random batches") {
  nn::Rng rng(101);
  SclConfig cfg;
  cfg.m = 0.3;
  for (int trial = 0; trial < 50; ++trial) {
    EmbeddingBatch batch = random_batch(rng, 8, 16);
    const std::vector<double> c = random_center(rng, 16);
    const SclForwardResult fwd = losses::scl_forward(batch, c, cfg);
    CHECK(fwd.loss == doctest::Approx(scl_reference(batch, c, cfg.m)).epsilon(1e-10));
    CHECK(fwd.loss >= 0.0);
  }
}

TEST_CASE("scl invariances: permutation, rotation, scaling") {
  nn::Rng rng(103);
  SclConfig cfg;
  const int b = 8, d = 16;
  EmbeddingBatch batch = random_batch(rng, b, d);
  const std::vector<double> c = random_center(rng, d);
  const SclForwardResult base = losses::scl_forward(batch, c, cfg);

  // permutation
  std::vector<int> perm(b);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = b - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
  EmbeddingBatch shuffled;
  shuffled.vectors = Mat(b, d);
  shuffled.labels.resize(b);
  for (int i = 0; i < b; ++i) {
    shuffled.labels[i] = batch.labels[perm[i]];
    for (int j = 0; j < d; ++j)
      shuffled.vectors.at(i, j) = batch.vectors.at(perm[i], j);
  }
  CHECK(losses::scl_forward(shuffled, c, cfg).loss ==
        doctest::Approx(base.loss).epsilon(1e-12));

  // rigid rotation of embeddings and center together (a few Givens rotations)
  EmbeddingBatch rotated = batch;
  std::vector<double> rc = c;
  for (int k = 0; k < 10; ++k) {
    const int p = rng.uniform_int(0, d - 1);
    int q = rng.uniform_int(0, d - 2);
    if (q >= p) ++q;
    const double th = 2.0 * rng.uniform();
    const double cs = std::cos(th), sn = std::sin(th);
    const auto rot = [&](double* v) {
      const double vp = v[p], vq = v[q];
      v[p] = cs * vp - sn * vq;
      v[q] = sn * vp + cs * vq;
    };
    for (int i = 0; i < b; ++i) rot(rotated.vectors.row(i));
    rot(rc.data());
  }
  CHECK(losses::scl_forward(rotated, rc, cfg).loss ==
        doctest::Approx(base.loss).epsilon(1e-9));

  // scaling by k scales the distance means, not the margin
  const double k = 2.75;
  EmbeddingBatch scaled = batch;
  std::vector<double> sc = c;
  for (int64_t i = 0; i < scaled.vectors.size(); ++i) scaled.vectors.data()[i] *= k;
  for (double& v : sc) v *= k;
  const SclForwardResult s = losses::scl_forward(scaled, sc, cfg);
  CHECK(s.m_nat == doctest::Approx(k * base.m_nat).epsilon(1e-10));
  CHECK(s.m_man == doctest::Approx(k * base.m_man).epsilon(1e-10));
  CHECK(s.hinge_arg == doctest::Approx(k * (base.m_nat - base.m_man) +
                                       cfg.m * std::sqrt(double(d)))
                           .epsilon(1e-9));
}

TEST_CASE("scl single-class batches are inactive with zero gradients") {
  nn::Rng rng(107);
  EmbeddingBatch batch = random_batch(rng, 6, 8);
  std::fill(batch.labels.begin(), batch.labels.end(), 1);
  const std::vector<double> c = random_center(rng, 8);
  const SclForwardResult fwd = losses::scl_forward(batch, c, SclConfig{});
  CHECK_FALSE(fwd.active);
  CHECK(fwd.loss == 0.0);
  Mat ge;
  std::vector<double> gc;
  losses::scl_backward(batch, c, SclConfig{}, fwd, &ge, &gc);
  for (int64_t i = 0; i < ge.size(); ++i) CHECK(ge.data()[i] == 0.0);
  for (double v : gc) CHECK(v == 0.0);
}

TEST_CASE("scl gradient equals the analytic formula structure when s=t=1") {
  nn::Rng rng(109);
  SclConfig cfg;
  cfg.m = 2.0;  // force the hinge on
  const int d = 12;
  EmbeddingBatch batch = random_batch(rng, 2, d);
  const std::vector<double> c = random_center(rng, d);
  const SclForwardResult fwd = losses::scl_forward(batch, c, cfg);
  REQUIRE(fwd.hinge_arg > 0.0);
  Mat ge;
  std::vector<double> gc;
  losses::scl_backward(batch, c, cfg, fwd, &ge, &gc);

  // natural row: 2*(f-C)/||f-C||; manipulated row: -(f-C)/||f-C||
  const double dn = dist(batch.vectors.row(0), c.data(), d);
  const double dm = dist(batch.vectors.row(1), c.data(), d);
  for (int j = 0; j < d; ++j) {
    CHECK(ge.at(0, j) == doctest::Approx(2.0 * (batch.vectors.at(0, j) - c[j]) / dn)
                             .epsilon(1e-10));
    CHECK(ge.at(1, j) == doctest::Approx(-(batch.vectors.at(1, j) - c[j]) / dm)
                             .epsilon(1e-10));
    // Eq. 5 collapses to the negative sum of the embedding gradients
    CHECK(gc[j] == doctest::Approx(-(ge.at(0, j) + ge.at(1, j))).epsilon(1e-10));
  }
}

TEST_CASE("scl analytic gradients match finite differences") {
  nn::Rng rng(113);
  SclConfig cfg;
  cfg.m = 0.3;
  const int b = 8, d = 16;
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    EmbeddingBatch batch = random_batch(rng, b, d);
    std::vector<double> c = random_center(rng, d);
    const SclForwardResult fwd = losses::scl_forward(batch, c, cfg);
    if (std::abs(fwd.hinge_arg) < 1e-3) continue;  // hinge kink exclusion
    bool near_center = false;
    for (int i = 0; i < b; ++i)
      near_center = near_center || dist(batch.vectors.row(i), c.data(), d) < 1e-6;
    if (near_center) continue;

    Mat ge;
    std::vector<double> gc;
    losses::scl_backward(batch, c, cfg, fwd, &ge, &gc);

    double worst = 0.0;
    const auto probe = [&](double* slot, double analytic) {
      const double keep = *slot;
      *slot = keep + h;
      const double lp = losses::scl_forward(batch, c, cfg).loss;
      *slot = keep - h;
      const double lm = losses::scl_forward(batch, c, cfg).loss;
      *slot = keep;
      const double fd = (lp - lm) / (2.0 * h);
      // denominator floored at 1e-3: for near-zero components the central
      // difference is dominated by cancellation noise (~1e-10 absolute here),
      // so a pure relative error would be meaningless for them
      worst = std::max(worst, std::abs(analytic - fd) /
                                  std::max({1e-3, std::abs(analytic), std::abs(fd)}));
    };
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < d; ++j) probe(&batch.vectors.at(i, j), ge.at(i, j));
    for (int j = 0; j < d; ++j) probe(&c[j], gc[j]);
    CHECK(worst < 1e-5);
    ++checked;
  }
  CHECK(checked >= 15);  // the exclusions must not eat the test
}

TEST_CASE("a small step against the manipulated gradient increases distance") {
  nn::Rng rng(127);
  SclConfig cfg;
  cfg.m = 2.0;  // hinge on
  const int d = 10;
  EmbeddingBatch batch = random_batch(rng, 2, d);
  const std::vector<double> c = random_center(rng, d);
  const SclForwardResult fwd = losses::scl_forward(batch, c, cfg);
  REQUIRE(fwd.hinge_arg > 0.0);
  Mat ge;
  std::vector<double> gc;
  losses::scl_backward(batch, c, cfg, fwd, &ge, &gc);
  const double before = dist(batch.vectors.row(1), c.data(), d);
  for (int j = 0; j < d; ++j) batch.vectors.at(1, j) -= 1e-3 * ge.at(1, j);
  CHECK(dist(batch.vectors.row(1), c.data(), d) > before);
}

TEST_CASE("cross entropy value and gradient") {
  Mat logits(2, 2);
  logits.at(0, 0) = 0.0;
  logits.at(0, 1) = 0.0;
  logits.at(1, 0) = 3.0;
  logits.at(1, 1) = -1.0;
  Mat grad;
  const double ce = losses::cross_entropy(logits, {0, 0}, &grad);
  // first row: uniform -> ln 2; second: -log(sigmoid(4))
  const double want = 0.5 * (std::log(2.0) + std::log1p(std::exp(-4.0)));
  CHECK(ce == doctest::Approx(want).epsilon(1e-12));

  nn::Rng rng(131);
  Mat rl(4, 2);
  for (int64_t i = 0; i < rl.size(); ++i) rl.data()[i] = rng.normal();
  const std::vector<int> y = {0, 1, 1, 0};
  Mat g;
  losses::cross_entropy(rl, y, &g);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) {
      const double keep = rl.at(i, j);
      rl.at(i, j) = keep + h;
      const double lp = losses::cross_entropy(rl, y, nullptr);
      rl.at(i, j) = keep - h;
      const double lm = losses::cross_entropy(rl, y, nullptr);
      rl.at(i, j) = keep;
      CHECK(g.at(i, j) == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("total loss composition and lambda=0 reduction") {
  nn::Rng rng(137);
  const int b = 6, d = 8;
  EmbeddingBatch batch = random_batch(rng, b, d);
  const std::vector<double> c = random_center(rng, d);
  Mat logits(b, 2);
  for (int64_t i = 0; i < logits.size(); ++i) logits.data()[i] = rng.normal();

  SclConfig cfg;
  cfg.lambda = 0.5;
  const auto r = losses::total_loss(logits, batch, c, cfg);
  Mat ce_grad;
  const double ce = losses::cross_entropy(logits, batch.labels, &ce_grad);
  const SclForwardResult fwd = losses::scl_forward(batch, c, cfg);
  CHECK(r.total == doctest::Approx(ce + cfg.lambda * fwd.loss).epsilon(1e-12));
  CHECK(r.ce == doctest::Approx(ce).epsilon(1e-12));

  Mat ge;
  std::vector<double> gc;
  losses::scl_backward(batch, c, cfg, fwd, &ge, &gc);
  for (int64_t i = 0; i < ge.size(); ++i)
    CHECK(r.grad_embeddings.data()[i] ==
          doctest::Approx(cfg.lambda * ge.data()[i]).epsilon(1e-12));
  for (int j = 0; j < d; ++j)
    CHECK(r.grad_center[j] == doctest::Approx(cfg.lambda * gc[j]).epsilon(1e-12));
  for (int64_t i = 0; i < ce_grad.size(); ++i)
    CHECK(r.grad_logits.data()[i] == ce_grad.data()[i]);

  SclConfig off = cfg;
  off.lambda = 0.0;
  const auto r0 = losses::total_loss(logits, batch, c, off);
  CHECK(r0.total == ce);  // exactly the cross-entropy
  for (int64_t i = 0; i < r0.grad_embeddings.size(); ++i)
    CHECK(r0.grad_embeddings.data()[i] == 0.0);
  for (double v : r0.grad_center) CHECK(v == 0.0);
}

TEST_CASE("center loss zero case and oracle") {
  nn::Rng rng(139);
  const int d = 6;
  const std::vector<double> cn = random_center(rng, d);
  const std::vector<double> cm = random_center(rng, d);

  EmbeddingBatch at_centers;
  at_centers.vectors = Mat(4, d);
  at_centers.labels = {0, 1, 0, 1};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < d; ++j)
      at_centers.vectors.at(i, j) = (at_centers.labels[i] == 0 ? cn : cm)[j];
  CHECK(losses::center_loss(at_centers, cn, cm).loss == doctest::Approx(0.0));

  EmbeddingBatch batch = random_batch(rng, 6, d);
  const auto r = losses::center_loss(batch, cn, cm);
  double want = 0.0;
  for (int i = 0; i < 6; ++i) {
    const auto& c = batch.labels[i] == 0 ? cn : cm;
    for (int j = 0; j < d; ++j) {
      const double diff = batch.vectors.at(i, j) - c[j];
      want += diff * diff;
    }
  }
  CHECK(r.loss == doctest::Approx(want / 6.0).epsilon(1e-10));

  // gradient spot check against finite differences
  const double h = 1e-6;
  for (int j = 0; j < d; ++j) {
    const double keep = batch.vectors.at(2, j);
    batch.vectors.at(2, j) = keep + h;
    const double lp = losses::center_loss(batch, cn, cm).loss;
    batch.vectors.at(2, j) = keep - h;
    const double lm = losses::center_loss(batch, cn, cm).loss;
    batch.vectors.at(2, j) = keep;
    CHECK(r.grad_embeddings.at(2, j) ==
          doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("triplet loss zero case, oracle and degenerate batch") {
  const int d = 4;
  // anchor == positive, negative far away: no violation at margin 0.3
  EmbeddingBatch easy;
  easy.vectors = Mat(3, d);
  easy.labels = {0, 0, 1};
  for (int j = 0; j < d; ++j) {
    easy.vectors.at(0, j) = 1.0;
    easy.vectors.at(1, j) = 1.0;
    easy.vectors.at(2, j) = 5.0;
  }
  const auto r0 = losses::triplet_loss(easy, 0.3);
  CHECK_FALSE(r0.degenerate);
  CHECK(r0.loss == doctest::Approx(0.0));

  nn::Rng rng(149);
  EmbeddingBatch batch = random_batch(rng, 6, d);
  const double margin = 0.3;
  const auto r = losses::triplet_loss(batch, margin);
  double want = 0.0;
  int count = 0;
  for (int a = 0; a < 6; ++a)
    for (int p = 0; p < 6; ++p) {
      if (a == p || batch.labels[a] != batch.labels[p]) continue;
      for (int n = 0; n < 6; ++n) {
        if (batch.labels[n] == batch.labels[a]) continue;
        ++count;
        const double d_ap = dist(batch.vectors.row(a), batch.vectors.row(p), d);
        const double d_an = dist(batch.vectors.row(a), batch.vectors.row(n), d);
        want += std::max(d_ap - d_an + margin, 0.0);
      }
    }
  CHECK(count > 0);
  CHECK(r.loss == doctest::Approx(want / count).epsilon(1e-10));

  // gradient spot check
  const double h = 1e-6;
  for (int j = 0; j < d; ++j) {
    const double keep = batch.vectors.at(1, j);
    batch.vectors.at(1, j) = keep + h;
    const double lp = losses::triplet_loss(batch, margin).loss;
    batch.vectors.at(1, j) = keep - h;
    const double lm = losses::triplet_loss(batch, margin).loss;
    batch.vectors.at(1, j) = keep;
    CHECK(r.grad_embeddings.at(1, j) ==
          doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
  }

  EmbeddingBatch single = random_batch(rng, 4, d);
  std::fill(single.labels.begin(), single.labels.end(), 0);
  CHECK(losses::triplet_loss(single, margin).degenerate);
}
