#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "scnn/layers.hpp"

namespace scnn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // relu coordinates near the kink
};

/// Compares backward_layer against central finite differences of the scalar
/// loss sum(output * r), where r is a fixed random projection. Every input
/// coordinate and every learned parameter coordinate is perturbed by
/// +-epsilon. Dropout masks are frozen by reseeding the mask stream before
/// each forward pass. Runs in train mode so batch-norm batch statistics are
/// part of the checked map.
///
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-3);
/// the floor keeps near-zero gradients from producing meaningless ratios.
template <typename T = double>
GradCheckResult finite_difference_check(const LayerSpec& spec, const BasicTensor<T>& input, double epsilon,
                                        std::uint64_t seed = 0) {
  if (!(epsilon > 0.0)) detail::fail(ErrorCategory::range, "tensor-core", "finite difference epsilon must be > 0");

  Rng init_rng(derive_seed(seed, {1}));
  LayerParams<T> params = init_layer_params<T>(spec, init_rng);
  // move biases and batch-norm affine terms off their trivial initial values
  for (auto& t : params.learned)
    for (auto& v : t.values()) v += static_cast<T>(init_rng.uniform(-0.5, 0.5));

  const std::uint64_t mask_seed = derive_seed(seed, {2});
  auto loss_of = [&](LayerParams<T>& p, const BasicTensor<T>& x, const BasicTensor<T>& proj) {
    ForwardContext<T> ctx;
    Rng mask_rng(mask_seed);
    const BasicTensor<T> y = forward_layer(spec, p, ctx, x, Mode::train, &mask_rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += static_cast<double>(y[i]) * static_cast<double>(proj[i]);
    return acc;
  };

  ForwardContext<T> ctx;
  Rng mask_rng(mask_seed);
  const BasicTensor<T> y = forward_layer(spec, params, ctx, input, Mode::train, &mask_rng);
  Rng proj_rng(derive_seed(seed, {3}));
  BasicTensor<T> proj(y.shape());
  for (auto& v : proj.values()) v = static_cast<T>(proj_rng.uniform(-1.0, 1.0));
  const LayerGradients<T> grads = backward_layer(spec, params, ctx, proj);

  GradCheckResult result;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.checked;
  };

  const double kink_radius = std::max(1e-6, epsilon);
  BasicTensor<T> x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (spec.kind == LayerKind::relu && std::abs(static_cast<double>(input[i])) < kink_radius) {
      ++result.skipped;
      continue;
    }
    const T orig = x[i];
    x[i] = static_cast<T>(static_cast<double>(orig) + epsilon);
    const double lp = loss_of(params, x, proj);
    x[i] = static_cast<T>(static_cast<double>(orig) - epsilon);
    const double lm = loss_of(params, x, proj);
    x[i] = orig;
    compare(static_cast<double>(grads.input[i]), (lp - lm) / (2.0 * epsilon));
  }

  for (std::size_t t = 0; t < params.learned.size(); ++t) {
    for (std::size_t i = 0; i < params.learned[t].size(); ++i) {
      LayerParams<T> p = params;
      const T orig = p.learned[t][i];
      p.learned[t][i] = static_cast<T>(static_cast<double>(orig) + epsilon);
      const double lp = loss_of(p, input, proj);
      p.learned[t][i] = static_cast<T>(static_cast<double>(orig) - epsilon);
      const double lm = loss_of(p, input, proj);
      compare(static_cast<double>(grads.params[t][i]), (lp - lm) / (2.0 * epsilon));
    }
  }
  return result;
}

}  // namespace scnn
