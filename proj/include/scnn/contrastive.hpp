#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "scnn/tensor.hpp"

namespace scnn {

namespace detail {
inline void check_pair(std::size_t a, std::size_t b, double margin) {
  if (a != b) fail(ErrorCategory::shape, "siamese-training", "embedding length mismatch: ", a, " vs ", b);
  if (!(margin > 0.0)) fail(ErrorCategory::range, "siamese-training", "margin must be > 0, got ", margin);
}
}  // namespace detail

/// Contrastive loss of one pair: D^2/2 for same-label pairs,
/// max(0, margin - D)^2 / 2 otherwise, with D the Euclidean distance.
inline double contrastive_loss(std::span<const float> e1, std::span<const float> e2, bool same_label, double margin) {
  detail::check_pair(e1.size(), e2.size(), margin);
  const double d = l2_distance(e1, e2);
  if (same_label) return 0.5 * d * d;
  const double h = std::max(0.0, margin - d);
  return 0.5 * h * h;
}

inline double contrastive_loss(const Tensor& e1, const Tensor& e2, bool same_label, double margin) {
  return contrastive_loss(e1.span(), e2.span(), same_label, margin);
}

struct PairGradient {
  std::vector<double> first;
  std::vector<double> second;  // always the negation of `first`
};

/// Analytic gradient of contrastive_loss with respect to both embeddings.
/// A different-label pair at D == 0 takes the zero subgradient.
inline PairGradient contrastive_loss_grad(std::span<const float> e1, std::span<const float> e2, bool same_label,
                                          double margin) {
  detail::check_pair(e1.size(), e2.size(), margin);
  const std::size_t n = e1.size();
  PairGradient g{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  double scale;
  if (same_label) {
    scale = 1.0;
  } else {
    const double d = l2_distance(e1, e2);
    if (d >= margin || d == 0.0) return g;
    scale = -(margin - d) / d;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double v = scale * (static_cast<double>(e1[i]) - static_cast<double>(e2[i]));
    g.first[i] = v;
    g.second[i] = -v;
  }
  return g;
}

inline PairGradient contrastive_loss_grad(const Tensor& e1, const Tensor& e2, bool same_label, double margin) {
  return contrastive_loss_grad(e1.span(), e2.span(), same_label, margin);
}

}  // namespace scnn
