#pragma once

#include <vector>

#include "fdfl/tensor.hpp"

namespace fdfl::losses {

struct EmbeddingBatch {
  Mat vectors;              // B x D
  std::vector<int> labels;  // 0 natural, 1 manipulated

  int batch() const { return vectors.rows(); }
  int dim() const { return vectors.cols(); }
  void validate() const;
};

struct SclConfig {
  double m = 0.3;          // margin scale; effective margin is m*sqrt(D)
  double lambda = 0.5;     // weight of SCL in the total loss
  double eps_dist = 1e-12; // distance guard in gradient denominators
};

struct SclForwardResult {
  double loss = 0.0;
  double m_nat = 0.0;
  double m_man = 0.0;
  double hinge_arg = 0.0;  // M_nat - M_man + m*sqrt(D)
  int s = 0;               // natural count
  int t = 0;               // manipulated count
  bool active = false;     // both classes present
};

// L_sc = M_nat + max(M_nat - M_man + m*sqrt(D), 0). Single-class batches are
// inactive and contribute zero loss and zero gradients.
SclForwardResult scl_forward(const EmbeddingBatch& batch,
                             const std::vector<double>& center,
                             const SclConfig& cfg);

// Analytic gradients; the hinge indicator uses fwd.hinge_arg > 0 and distances
// are floored at cfg.eps_dist in denominators.
void scl_backward(const EmbeddingBatch& batch, const std::vector<double>& center,
                  const SclConfig& cfg, const SclForwardResult& fwd,
                  Mat* grad_embeddings, std::vector<double>* grad_center);

// Mean softmax cross-entropy over the batch; grad_logits gets (p - onehot)/B.
double cross_entropy(const Mat& logits, const std::vector<int>& labels,
                     Mat* grad_logits);

struct TotalLossResult {
  double total = 0.0;
  double ce = 0.0;
  SclForwardResult scl;
  Mat grad_logits;
  Mat grad_embeddings;
  std::vector<double> grad_center;
};

// L_total = cross_entropy + lambda * L_sc; SCL gradients arrive pre-scaled by
// lambda so they can be fed straight to the optimizer.
TotalLossResult total_loss(const Mat& logits, const EmbeddingBatch& batch,
                           const std::vector<double>& center,
                           const SclConfig& cfg);

struct BaselineLossResult {
  double loss = 0.0;
  bool degenerate = false;  // e.g. no valid triplet
  Mat grad_embeddings;
  // center loss only: gradients for the two class centers
  std::vector<double> grad_center_nat, grad_center_man;
};

// Mean squared distance to the per-class learnable centers.
BaselineLossResult center_loss(const EmbeddingBatch& batch,
                               const std::vector<double>& center_nat,
                               const std::vector<double>& center_man);

// Batch-all triplet hinge with Euclidean distances; mean over valid triplets.
BaselineLossResult triplet_loss(const EmbeddingBatch& batch, double margin,
                                double eps_dist = 1e-12);

}  // namespace fdfl::losses
