#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "scnn/layers.hpp"

namespace scnn {

/// Ordered layer list with optional residual connections. A residual pair
/// (start, end) adds the input of layer `start` to the output of layer `end`.
struct NetworkSpec {
  Shape input_shape;  // per sample {channels, height, width}
  std::vector<LayerSpec> layers;
  std::size_t embedding_dim = 0;
  std::vector<std::pair<std::size_t, std::size_t>> residual_blocks;

  /// Per-sample output shape of every layer, after residual additions.
  /// Throws a structured error naming the first incompatible layer pair.
  std::vector<Shape> layer_shapes() const {
    static constexpr const char* kModule = "network";
    if (input_shape.size() != 3 || shape_size(input_shape) == 0) {
      detail::fail(ErrorCategory::config, kModule, "input shape must be {channels, height, width}, got ",
                   shape_string(input_shape));
    }
    if (layers.empty()) detail::fail(ErrorCategory::config, kModule, "network has no layers");
    std::vector<Shape> shapes;
    Shape cur = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].validate();
      auto next = layers[i].output_shape(cur);
      if (!next) {
        if (i == 0) {
          detail::fail(ErrorCategory::config, kModule, "layer 0 ", layers[i].describe(), " cannot accept input ",
                       shape_string(cur));
        }
        detail::fail(ErrorCategory::config, kModule, "layers ", i - 1, " (", layers[i - 1].describe(), ") and ", i, " (",
                     layers[i].describe(), ") are incompatible: ", shape_string(cur), " does not fit");
      }
      shapes.push_back(*next);
      cur = *next;
    }
    for (auto [s, e] : residual_blocks) {
      if (s > e || e >= layers.size()) {
        detail::fail(ErrorCategory::config, kModule, "residual block (", s, ",", e, ") is out of range");
      }
      const Shape& in = s == 0 ? input_shape : shapes[s - 1];
      if (in != shapes[e]) {
        detail::fail(ErrorCategory::config, kModule, "residual block (", s, ",", e, ") input ", shape_string(in),
                     " does not match output ", shape_string(shapes[e]));
      }
    }
    if (embedding_dim == 0 || shapes.back() != Shape{embedding_dim}) {
      detail::fail(ErrorCategory::config, kModule, "final layer output ", shape_string(shapes.back()),
                   " is not a vector of embedding_dim=", embedding_dim);
    }
    return shapes;
  }

  void validate() const { (void)layer_shapes(); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Small residual backbone: conv stem, `blocks` residual conv blocks, dropout
/// on the final feature map, global average pooling and a linear bottleneck
/// producing the embedding. Dropout sits before the pooling: on the pooled
/// 16-wide vector it masks whole features and swamps the pair signal.
inline NetworkSpec default_network_spec(std::size_t input_size = 32, std::size_t embedding_dim = 32,
                                        std::size_t channels = 16, double dropout = 0.25, std::size_t blocks = 2) {
  NetworkSpec s;
  s.input_shape = {3, input_size, input_size};
  s.embedding_dim = embedding_dim;
  s.layers.push_back(LayerSpec::conv2d(3, channels, 3, 1, 1));
  s.layers.push_back(LayerSpec::batch_norm(channels));
  s.layers.push_back(LayerSpec::relu());
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t start = s.layers.size();
    s.layers.push_back(LayerSpec::conv2d(channels, channels, 3, 1, 1));
    s.layers.push_back(LayerSpec::batch_norm(channels));
    s.residual_blocks.emplace_back(start, start + 1);
    s.layers.push_back(LayerSpec::relu());
  }
  s.layers.push_back(LayerSpec::dropout(dropout));
  s.layers.push_back(LayerSpec::global_avg_pool());
  s.layers.push_back(LayerSpec::dense(channels, embedding_dim));
  return s;
}

/// The single shared parameter set W.
struct ParameterStore {
  std::vector<LayerParams<float>> layers;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;
};

/// Per-layer gradients of the learned parameters, mirroring ParameterStore.
using NetworkGradients = std::vector<std::vector<Tensor>>;

/// Embedding network f(.). Copies made with twin() read and update the same
/// ParameterStore; only the forward contexts are per instance.
class Network {
 public:
  Network(NetworkSpec spec, std::shared_ptr<ParameterStore> store)
      : spec_(std::move(spec)), store_(std::move(store)), contexts_(spec_.layers.size()) {
    spec_.validate();
    if (!store_ || store_->layers.size() != spec_.layers.size()) {
      detail::fail(ErrorCategory::state, "network", "parameter store does not match the network spec");
    }
    for (auto [s, e] : spec_.residual_blocks) {
      ends_at_[e].push_back(s);
      starts_at_[s].push_back(e);
    }
  }

  const NetworkSpec& spec() const noexcept { return spec_; }
  ParameterStore& parameters() noexcept { return *store_; }
  const ParameterStore& parameters() const noexcept { return *store_; }
  const std::shared_ptr<ParameterStore>& shared_store() const noexcept { return store_; }

  /// Second branch over the same parameter store.
  Network twin() const { return Network(spec_, store_); }

  /// Batched forward [N, C, H, W] -> [N, embedding_dim]; saves context for backward.
  Tensor forward(const Tensor& batch, Mode mode, Rng* rng = nullptr) {
    return run(batch, mode, rng, store_->layers, contexts_);
  }

  /// Infer-mode forward that touches no per-instance state; safe to call concurrently.
  Tensor infer(const Tensor& batch) const {
    std::vector<ForwardContext<float>> ctx(spec_.layers.size());
    // infer mode reads batch-norm running statistics and never writes parameters
    auto& layers = const_cast<std::vector<LayerParams<float>>&>(store_->layers);
    return run(batch, Mode::infer, nullptr, layers, ctx);
  }

  /// Backpropagates d(loss)/d(embeddings) from the last forward() call.
  NetworkGradients backward(const Tensor& grad_embeddings) const {
    NetworkGradients grads(spec_.layers.size());
    std::map<std::size_t, Tensor> skip_grad;
    Tensor g = grad_embeddings;
    for (std::size_t i = spec_.layers.size(); i-- > 0;) {
      if (auto it = ends_at_.find(i); it != ends_at_.end()) {
        for (std::size_t s : it->second) accumulate(skip_grad, s, g);
      }
      LayerGradients<float> lg = backward_layer(spec_.layers[i], store_->layers[i], contexts_[i], g);
      grads[i] = std::move(lg.params);
      g = std::move(lg.input);
      if (auto it = skip_grad.find(i); it != skip_grad.end()) {
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += it->second[k];
      }
    }
    return grads;
  }

  /// Flattened views of every learned tensor, in declaration order.
  std::vector<Tensor*> learned_parameters() {
    std::vector<Tensor*> out;
    for (auto& l : store_->layers)
      for (auto& t : l.learned) out.push_back(&t);
    return out;
  }

 private:
  static void accumulate(std::map<std::size_t, Tensor>& m, std::size_t key, const Tensor& g) {
    auto [it, inserted] = m.try_emplace(key, g);
    if (!inserted)
      for (std::size_t k = 0; k < g.size(); ++k) it->second[k] += g[k];
  }

  Tensor run(const Tensor& batch, Mode mode, Rng* rng, std::vector<LayerParams<float>>& layers,
             std::vector<ForwardContext<float>>& ctx) const {
    if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != spec_.input_shape) {
      detail::fail(ErrorCategory::shape, "network", "expected input [N,", spec_.input_shape[0], ",", spec_.input_shape[1],
                   ",", spec_.input_shape[2], "], got ", shape_string(batch.shape()));
    }
    std::map<std::size_t, Tensor> saved;
    Tensor x = batch;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      if (starts_at_.count(i)) saved[i] = x;
      x = forward_layer(spec_.layers[i], layers[i], ctx[i], x, mode, rng);
      if (auto it = ends_at_.find(i); it != ends_at_.end()) {
        for (std::size_t s : it->second) {
          const Tensor& skip = saved.at(s);
          for (std::size_t k = 0; k < x.size(); ++k) x[k] += skip[k];
        }
      }
    }
    return x;
  }

  NetworkSpec spec_;
  std::shared_ptr<ParameterStore> store_;
  std::vector<ForwardContext<float>> contexts_;
  std::map<std::size_t, std::vector<std::size_t>> ends_at_;
  std::map<std::size_t, std::vector<std::size_t>> starts_at_;
};

/// Deterministic construction: each layer draws from its own stream derived from (init_seed, layer index).
inline Network build_network(const NetworkSpec& spec, std::uint64_t init_seed) {
  spec.validate();
  auto store = std::make_shared<ParameterStore>();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    Rng rng(derive_seed(init_seed, {i}));
    store->layers.push_back(init_layer_params<float>(spec.layers[i], rng));
  }
  return Network(spec, std::move(store));
}

/// Embedding f(I) of one image tensor [C, H, W].
inline Tensor embed(Network& net, const Tensor& image, Mode mode = Mode::infer, Rng* rng = nullptr) {
  Shape batched{1};
  batched.insert(batched.end(), image.shape().begin(), image.shape().end());
  if (image.rank() != 3) {
    detail::fail(ErrorCategory::shape, "network", "embed expects an image [C,H,W], got ", shape_string(image.shape()));
  }
  Tensor out = mode == Mode::infer ? net.infer(image.reshaped(batched)) : net.forward(image.reshaped(batched), mode, rng);
  out.reshape({out.size()});
  return out;
}

}  // namespace scnn
