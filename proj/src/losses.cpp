#include "fdfl/losses.hpp"

#include <algorithm>
#include <cmath>

namespace fdfl::losses {
namespace {

double distance(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

}  // namespace

void EmbeddingBatch::validate() const {
  check(vectors.rows() >= 1, "empty embedding batch");
  check(static_cast<int>(labels.size()) == vectors.rows(),
        "labels size must match batch");
  for (int l : labels) check(l == 0 || l == 1, "labels must be 0/1");
  for (int64_t i = 0; i < vectors.size(); ++i)
    check(std::isfinite(vectors.data()[i]), "non-finite embedding");
}

SclForwardResult scl_forward(const EmbeddingBatch& batch,
                             const std::vector<double>& center,
                             const SclConfig& cfg) {
  batch.validate();
  check(static_cast<int>(center.size()) == batch.dim(),
        "center dimension mismatch: " + std::to_string(center.size()) + " vs " +
            std::to_string(batch.dim()));
  check(cfg.m >= 0.0 && cfg.lambda >= 0.0, "m and lambda must be >= 0");

  SclForwardResult r;
  double sum_nat = 0.0, sum_man = 0.0;
  for (int i = 0; i < batch.batch(); ++i) {
    const double d = distance(batch.vectors.row(i), center.data(), batch.dim());
    if (batch.labels[i] == 0) {
      sum_nat += d;
      ++r.s;
    } else {
      sum_man += d;
      ++r.t;
    }
  }
  r.active = r.s > 0 && r.t > 0;
  if (!r.active) return r;  // loss 0 by convention, Eq. 2-3 undefined

  r.m_nat = sum_nat / r.s;
  r.m_man = sum_man / r.t;
  r.hinge_arg = r.m_nat - r.m_man + cfg.m * std::sqrt(static_cast<double>(batch.dim()));
  r.loss = r.m_nat + std::max(r.hinge_arg, 0.0);
  return r;
}

void scl_backward(const EmbeddingBatch& batch, const std::vector<double>& center,
                  const SclConfig& cfg, const SclForwardResult& fwd,
                  Mat* grad_embeddings, std::vector<double>* grad_center) {
  batch.validate();
  check(static_cast<int>(center.size()) == batch.dim(), "center dimension mismatch");
  const int d = batch.dim();
  *grad_embeddings = Mat(batch.batch(), d);
  grad_center->assign(d, 0.0);
  if (!fwd.active) return;

  check(fwd.s + fwd.t == batch.batch(), "forward result does not match batch");
  const double indicator = fwd.hinge_arg > 0.0 ? 1.0 : 0.0;
  const double nat_scale = 1.0 + indicator;
  for (int i = 0; i < batch.batch(); ++i) {
    const double* f = batch.vectors.row(i);
    const double dist = std::max(distance(f, center.data(), d), cfg.eps_dist);
    double coef;
    if (batch.labels[i] == 0) {
      coef = nat_scale / (fwd.s * dist);
    } else {
      coef = -indicator / (fwd.t * dist);
    }
    double* g = grad_embeddings->row(i);
    double* gc = grad_center->data();
    for (int j = 0; j < d; ++j) {
      const double u = (f[j] - center[j]) * coef;
      g[j] = u;
      gc[j] -= u;  // each distance term depends on C through f_i - C
    }
  }
}

double cross_entropy(const Mat& logits, const std::vector<int>& labels,
                     Mat* grad_logits) {
  check(logits.rows() >= 1 && logits.rows() == static_cast<int>(labels.size()),
        "logits/labels mismatch");
  const int b = logits.rows(), k = logits.cols();
  if (grad_logits) *grad_logits = Mat(b, k);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* z = logits.row(i);
    check(labels[i] >= 0 && labels[i] < k, "label out of range");
    double zmax = z[0];
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
    const double log_denom = std::log(denom) + zmax;
    loss += log_denom - z[labels[i]];
    if (grad_logits) {
      double* g = grad_logits->row(i);
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(z[j] - log_denom);
        g[j] = (p - (j == labels[i] ? 1.0 : 0.0)) / b;
      }
    }
  }
  return loss / b;
}

TotalLossResult total_loss(const Mat& logits, const EmbeddingBatch& batch,
                           const std::vector<double>& center,
                           const SclConfig& cfg) {
  check(logits.rows() == batch.batch(),
        "logits and embeddings must come from the same forward pass");
  TotalLossResult r;
  r.ce = cross_entropy(logits, batch.labels, &r.grad_logits);
  r.scl = scl_forward(batch, center, cfg);
  r.total = r.ce + cfg.lambda * r.scl.loss;
  scl_backward(batch, center, cfg, r.scl, &r.grad_embeddings, &r.grad_center);
  for (int64_t i = 0; i < r.grad_embeddings.size(); ++i)
    r.grad_embeddings.data()[i] *= cfg.lambda;
  for (auto& g : r.grad_center) g *= cfg.lambda;
  return r;
}

BaselineLossResult center_loss(const EmbeddingBatch& batch,
                               const std::vector<double>& center_nat,
                               const std::vector<double>& center_man) {
  batch.validate();
  const int d = batch.dim();
  check(static_cast<int>(center_nat.size()) == d &&
            static_cast<int>(center_man.size()) == d,
        "center dimension mismatch");
  BaselineLossResult r;
  r.grad_embeddings = Mat(batch.batch(), d);
  r.grad_center_nat.assign(d, 0.0);
  r.grad_center_man.assign(d, 0.0);
  const double inv_b = 1.0 / batch.batch();
  for (int i = 0; i < batch.batch(); ++i) {
    const double* f = batch.vectors.row(i);
    const double* c = batch.labels[i] == 0 ? center_nat.data() : center_man.data();
    double* gc = batch.labels[i] == 0 ? r.grad_center_nat.data()
                                      : r.grad_center_man.data();
    double* g = r.grad_embeddings.row(i);
    for (int j = 0; j < d; ++j) {
      const double diff = f[j] - c[j];
      r.loss += diff * diff * inv_b;
      g[j] = 2.0 * diff * inv_b;
      gc[j] -= 2.0 * diff * inv_b;
    }
  }
  return r;
}

BaselineLossResult triplet_loss(const EmbeddingBatch& batch, double margin,
                                double eps_dist) {
  batch.validate();
  const int b = batch.batch(), d = batch.dim();
  BaselineLossResult r;
  r.grad_embeddings = Mat(b, d);

  // batch-all: every (anchor, positive, negative) with a != p, same label for
  // a/p, different for n
  int n_triplets = 0;
  for (int a = 0; a < b; ++a)
    for (int p = 0; p < b; ++p) {
      if (a == p || batch.labels[a] != batch.labels[p]) continue;
      for (int n = 0; n < b; ++n)
        if (batch.labels[n] != batch.labels[a]) ++n_triplets;
    }
  if (n_triplets == 0) {
    r.degenerate = true;
    return r;
  }

  const double inv = 1.0 / n_triplets;
  for (int a = 0; a < b; ++a) {
    const double* fa = batch.vectors.row(a);
    for (int p = 0; p < b; ++p) {
      if (a == p || batch.labels[a] != batch.labels[p]) continue;
      const double* fp = batch.vectors.row(p);
      const double d_ap = distance(fa, fp, d);
      for (int n = 0; n < b; ++n) {
        if (batch.labels[n] == batch.labels[a]) continue;
        const double* fn = batch.vectors.row(n);
        const double d_an = distance(fa, fn, d);
        const double h = d_ap - d_an + margin;
        if (h <= 0.0) continue;
        r.loss += h * inv;
        const double sap = inv / std::max(d_ap, eps_dist);
        const double san = inv / std::max(d_an, eps_dist);
        double* ga = r.grad_embeddings.row(a);
        double* gp = r.grad_embeddings.row(p);
        double* gn = r.grad_embeddings.row(n);
        for (int j = 0; j < d; ++j) {
          const double uap = (fa[j] - fp[j]) * sap;
          const double uan = (fa[j] - fn[j]) * san;
          ga[j] += uap - uan;
          gp[j] -= uap;
          gn[j] += uan;
        }
      }
    }
  }
  return r;
}

}  // namespace fdfl::losses
