#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "scnn/tensor.hpp"

namespace scnn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam step. Moments are created lazily on the first call.
template <typename T>
void adam_update(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads, AdamState<T>& state,
                 const AdamConfig& cfg) {
  static constexpr const char* kModule = "siamese-training";
  if (params.size() != grads.size()) {
    detail::fail(ErrorCategory::shape, kModule, "adam: ", params.size(), " parameters but ", grads.size(), " gradients");
  }
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->shape(), T{0});
      state.v.emplace_back(p->shape(), T{0});
    }
  }
  if (state.m.size() != params.size()) {
    detail::fail(ErrorCategory::shape, kModule, "adam state holds ", state.m.size(), " moments for ", params.size(),
                 " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || state.m[i].shape() != grads[i].shape()) {
      detail::fail(ErrorCategory::shape, kModule, "adam: parameter ", i, " shape ", shape_string(params[i]->shape()),
                   " vs gradient ", shape_string(grads[i].shape()));
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T* g = grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double step = cfg.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + cfg.epsilon);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - step);
    }
  }
}

}  // namespace scnn
