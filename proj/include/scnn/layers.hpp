#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scnn/error.hpp"
#include "scnn/random.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

enum class LayerKind : std::uint8_t { conv2d = 0, dense = 1, batch_norm = 2, relu = 3, global_avg_pool = 4, dropout = 5 };

enum class Mode { train, infer };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::relu: return "relu";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::dropout: return "dropout";
  }
  return "unknown";
}

/// Layer kind plus its hyperparameters. Shapes below are per sample; layers
/// themselves always run on a leading batch dimension.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;   // conv input channels, dense input features, batch-norm channels
  std::size_t out_channels = 0;  // conv output channels, dense output features
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  double dropout_rate = 0.0;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;

  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
  }
  static LayerSpec dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_channels = in;
    s.out_channels = out;
    return s;
  }
  static LayerSpec batch_norm(std::size_t channels, double epsilon = 1e-5, double momentum = 0.9) {
    LayerSpec s;
    s.kind = LayerKind::batch_norm;
    s.in_channels = channels;
    s.bn_epsilon = epsilon;
    s.bn_momentum = momentum;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec global_avg_pool() {
    LayerSpec s;
    s.kind = LayerKind::global_avg_pool;
    return s;
  }
  static LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.dropout_rate = rate;
    return s;
  }

  std::string describe() const {
    switch (kind) {
      case LayerKind::conv2d:
        return detail::concat("conv2d(", in_channels, "->", out_channels, ", k", kernel, " s", stride, " p", padding, ")");
      case LayerKind::dense: return detail::concat("dense(", in_channels, "->", out_channels, ")");
      case LayerKind::batch_norm: return detail::concat("batch_norm(", in_channels, ")");
      case LayerKind::dropout: return detail::concat("dropout(", dropout_rate, ")");
      default: return to_string(kind);
    }
  }

  void validate() const {
    auto bad = [&](const char* what) { detail::fail(ErrorCategory::config, "tensor-core", describe(), ": ", what); };
    switch (kind) {
      case LayerKind::conv2d:
        if (in_channels == 0 || out_channels == 0) bad("channel counts must be positive");
        if (kernel == 0) bad("kernel size must be positive");
        if (stride == 0) bad("stride must be >= 1");
        break;
      case LayerKind::dense:
        if (in_channels == 0 || out_channels == 0) bad("feature counts must be positive");
        break;
      case LayerKind::batch_norm:
        if (in_channels == 0) bad("channel count must be positive");
        if (!(bn_epsilon > 0.0)) bad("epsilon must be > 0");
        if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) bad("momentum must be in [0,1)");
        break;
      case LayerKind::dropout:
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad("dropout rate must be in [0,1)");
        break;
      default: break;
    }
  }

  /// Per-sample output shape, or nullopt when the per-sample input shape is incompatible.
  std::optional<Shape> output_shape(const Shape& in) const {
    switch (kind) {
      case LayerKind::conv2d: {
        if (in.size() != 3 || in[0] != in_channels) return std::nullopt;
        if (in[1] + 2 * padding < kernel || in[2] + 2 * padding < kernel) return std::nullopt;
        return Shape{out_channels, (in[1] + 2 * padding - kernel) / stride + 1, (in[2] + 2 * padding - kernel) / stride + 1};
      }
      case LayerKind::dense:
        if (in.size() != 1 || in[0] != in_channels) return std::nullopt;
        return Shape{out_channels};
      case LayerKind::batch_norm:
        if ((in.size() != 1 && in.size() != 3) || in[0] != in_channels) return std::nullopt;
        return in;
      case LayerKind::global_avg_pool:
        if (in.size() != 3) return std::nullopt;
        return Shape{in[0]};
      case LayerKind::relu:
      case LayerKind::dropout: return in;
    }
    return std::nullopt;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Learned parameters and non-learned buffers of one layer.
///   conv2d: learned {weight[out,in,k,k], bias[out]}
///   dense: learned {weight[out,in], bias[out]}
///   batch_norm: learned {gamma[c], beta[c]}, buffers {running_mean[c], running_var[c]}
template <typename T>
struct LayerParams {
  std::vector<BasicTensor<T>> learned;
  std::vector<BasicTensor<T>> buffers;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// What backward needs from the most recent forward call.
template <typename T>
struct ForwardContext {
  bool valid = false;
  Mode mode = Mode::infer;
  BasicTensor<T> input;
  Shape output_shape;
  std::vector<T> mask;              // dropout
  std::vector<double> normalized;   // batch_norm x_hat
  std::vector<double> inv_std;      // batch_norm per channel
};

template <typename T>
struct LayerState {
  LayerParams<T> params;
  ForwardContext<T> context;
};

template <typename T>
struct LayerGradients {
  BasicTensor<T> input;
  std::vector<BasicTensor<T>> params;  // same order as LayerParams::learned
};

/// He-style fan-in initialization for conv/dense; gamma=1, beta=0 for batch norm.
template <typename T>
LayerParams<T> init_layer_params(const LayerSpec& spec, Rng& rng) {
  spec.validate();
  LayerParams<T> p;
  auto he = [&](Shape shape, std::size_t fan_in) {
    BasicTensor<T> w(std::move(shape));
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : w.values()) v = static_cast<T>(rng.normal(0.0, sd));
    return w;
  };
  switch (spec.kind) {
    case LayerKind::conv2d: {
      const std::size_t fan_in = spec.in_channels * spec.kernel * spec.kernel;
      p.learned.push_back(he({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}, fan_in));
      p.learned.emplace_back(Shape{spec.out_channels});
      break;
    }
    case LayerKind::dense:
      p.learned.push_back(he({spec.out_channels, spec.in_channels}, spec.in_channels));
      p.learned.emplace_back(Shape{spec.out_channels});
      break;
    case LayerKind::batch_norm:
      p.learned.emplace_back(Shape{spec.in_channels}, T{1});
      p.learned.emplace_back(Shape{spec.in_channels}, T{0});
      p.buffers.emplace_back(Shape{spec.in_channels}, T{0});
      p.buffers.emplace_back(Shape{spec.in_channels}, T{1});
      break;
    default: break;
  }
  return p;
}

namespace detail {

inline constexpr const char* kTensorCore = "tensor-core";

template <typename T>
void check_input(const LayerSpec& spec, const LayerParams<T>& params, const BasicTensor<T>& input) {
  const Shape& s = input.shape();
  if (s.size() < 2) {
    fail(ErrorCategory::shape, kTensorCore, "layer ", spec.describe(), " expects a batched input, got ", shape_string(s));
  }
  const Shape sample(s.begin() + 1, s.end());
  if (!spec.output_shape(sample)) {
    fail(ErrorCategory::shape, kTensorCore, "layer ", spec.describe(), " cannot accept input ", shape_string(s));
  }
  std::size_t want_learned = 0;
  if (spec.kind == LayerKind::conv2d || spec.kind == LayerKind::dense || spec.kind == LayerKind::batch_norm) want_learned = 2;
  if (params.learned.size() != want_learned) {
    fail(ErrorCategory::state, kTensorCore, "layer ", spec.describe(), " has ", params.learned.size(),
         " parameter tensors, expected ", want_learned);
  }
  if (!input.all_finite()) {
    fail(ErrorCategory::numeric, kTensorCore, "layer ", spec.describe(), " received non-finite input");
  }
}

// out[OC,OH,OW] = bias + conv(in[C,H,W], w[OC,C,k,k]); acc is scratch of OH*OW doubles
template <typename T>
void conv_forward_sample(const LayerSpec& sp, const T* in, std::size_t C, std::size_t H, std::size_t W, const T* w,
                         const T* bias, std::size_t OH, std::size_t OW, T* out, std::vector<double>& acc) {
  const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(sp.kernel);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(sp.stride);
  const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(sp.padding);
  const std::ptrdiff_t iH = static_cast<std::ptrdiff_t>(H), iW = static_cast<std::ptrdiff_t>(W);
  acc.resize(OH * OW);
  for (std::size_t oc = 0; oc < sp.out_channels; ++oc) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(bias[oc]));
    for (std::size_t ic = 0; ic < C; ++ic) {
      const T* plane = in + ic * H * W;
      for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
        for (std::ptrdiff_t kw = 0; kw < k; ++kw) {
          const double wv = static_cast<double>(w[((oc * C + ic) * sp.kernel + kh) * sp.kernel + kw]);
          // ow range where iw = ow*s + kw - p lies inside [0, W)
          std::ptrdiff_t lo = 0;
          while (lo * s + kw - p < 0) ++lo;
          std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(OW) - 1;
          while (hi >= lo && hi * s + kw - p >= iW) --hi;
          for (std::size_t oh = 0; oh < OH; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * s + kh - p;
            if (ih < 0 || ih >= iH) continue;
            const T* row = plane + ih * iW;
            double* arow = acc.data() + oh * OW;
            if (s == 1) {
              const T* src = row + kw - p;
              for (std::ptrdiff_t ow = lo; ow <= hi; ++ow) arow[ow] += wv * static_cast<double>(src[ow]);
            } else {
              for (std::ptrdiff_t ow = lo; ow <= hi; ++ow) arow[ow] += wv * static_cast<double>(row[ow * s + kw - p]);
            }
          }
        }
      }
    }
    T* o = out + oc * OH * OW;
    for (std::size_t i = 0; i < OH * OW; ++i) o[i] = static_cast<T>(acc[i]);
  }
}

// Dot product with four fixed accumulators: vectorizable and order-stable.
inline double dot4(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
BasicTensor<T> forward_conv(const LayerSpec& sp, const LayerParams<T>& params, const BasicTensor<T>& x) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Shape os = *sp.output_shape({C, H, W});
  const std::size_t OH = os[1], OW = os[2];
  BasicTensor<T> y({N, sp.out_channels, OH, OW});
  std::vector<double> acc;
  for (std::size_t n = 0; n < N; ++n) {
    conv_forward_sample(sp, x.data() + n * C * H * W, C, H, W, params.learned[0].data(), params.learned[1].data(), OH,
                        OW, y.data() + n * sp.out_channels * OH * OW, acc);
  }
  return y;
}

template <typename T>
LayerGradients<T> backward_conv(const LayerSpec& sp, const LayerParams<T>& params, const BasicTensor<T>& x,
                                const BasicTensor<T>& gy) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t OC = sp.out_channels, OH = gy.dim(2), OW = gy.dim(3);
  const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(sp.kernel);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(sp.stride);
  const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(sp.padding);
  const std::ptrdiff_t iH = static_cast<std::ptrdiff_t>(H), iW = static_cast<std::ptrdiff_t>(W);
  const T* w = params.learned[0].data();

  std::vector<double> gw(OC * C * sp.kernel * sp.kernel, 0.0), gb(OC, 0.0);
  std::vector<double> gin(C * H * W), xin(C * H * W), gout(OC * OH * OW);
  LayerGradients<T> g;
  g.input = BasicTensor<T>(x.shape());

  for (std::size_t n = 0; n < N; ++n) {
    const T* xs = x.data() + n * C * H * W;
    const T* gs = gy.data() + n * OC * OH * OW;
    for (std::size_t i = 0; i < xin.size(); ++i) xin[i] = static_cast<double>(xs[i]);
    for (std::size_t i = 0; i < gout.size(); ++i) gout[i] = static_cast<double>(gs[i]);
    std::fill(gin.begin(), gin.end(), 0.0);

    for (std::size_t oc = 0; oc < OC; ++oc) {
      const double* go = gout.data() + oc * OH * OW;
      double bsum = 0.0;
      for (std::size_t i = 0; i < OH * OW; ++i) bsum += go[i];
      gb[oc] += bsum;
      for (std::size_t ic = 0; ic < C; ++ic) {
        const double* xplane = xin.data() + ic * H * W;
        double* gplane = gin.data() + ic * H * W;
        for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
          for (std::ptrdiff_t kw = 0; kw < k; ++kw) {
            const std::size_t widx = ((oc * C + ic) * sp.kernel + kh) * sp.kernel + kw;
            const double wv = static_cast<double>(w[widx]);
            std::ptrdiff_t lo = 0;
            while (lo * s + kw - p < 0) ++lo;
            std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(OW) - 1;
            while (hi >= lo && hi * s + kw - p >= iW) --hi;
            if (hi < lo) continue;
            double wsum = 0.0;
            for (std::size_t oh = 0; oh < OH; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * s + kh - p;
              if (ih < 0 || ih >= iH) continue;
              const double* grow = go + oh * OW;
              if (s == 1) {
                const double* xr = xplane + ih * iW + kw - p;
                double* gr = gplane + ih * iW + kw - p;
                wsum += dot4(grow + lo, xr + lo, static_cast<std::size_t>(hi - lo + 1));
                for (std::ptrdiff_t ow = lo; ow <= hi; ++ow) gr[ow] += wv * grow[ow];
              } else {
                for (std::ptrdiff_t ow = lo; ow <= hi; ++ow) {
                  const std::ptrdiff_t iw = ow * s + kw - p;
                  wsum += grow[ow] * xplane[ih * iW + iw];
                  gplane[ih * iW + iw] += wv * grow[ow];
                }
              }
            }
            gw[widx] += wsum;
          }
        }
      }
    }
    T* gi = g.input.data() + n * C * H * W;
    for (std::size_t i = 0; i < gin.size(); ++i) gi[i] = static_cast<T>(gin[i]);
  }
  g.params.emplace_back(params.learned[0].shape(), std::vector<T>(gw.begin(), gw.end()));
  g.params.emplace_back(params.learned[1].shape(), std::vector<T>(gb.begin(), gb.end()));
  return g;
}

template <typename T>
BasicTensor<T> forward_dense(const LayerSpec& sp, const LayerParams<T>& params, const BasicTensor<T>& x) {
  const std::size_t N = x.dim(0), I = sp.in_channels, O = sp.out_channels;
  const T* w = params.learned[0].data();
  const T* b = params.learned[1].data();
  BasicTensor<T> y({N, O});
  for (std::size_t n = 0; n < N; ++n) {
    const T* xs = x.data() + n * I;
    for (std::size_t o = 0; o < O; ++o) {
      double acc = static_cast<double>(b[o]);
      const T* wr = w + o * I;
      for (std::size_t i = 0; i < I; ++i) acc += static_cast<double>(wr[i]) * static_cast<double>(xs[i]);
      y[n * O + o] = static_cast<T>(acc);
    }
  }
  return y;
}

template <typename T>
LayerGradients<T> backward_dense(const LayerSpec& sp, const LayerParams<T>& params, const BasicTensor<T>& x,
                                 const BasicTensor<T>& gy) {
  const std::size_t N = x.dim(0), I = sp.in_channels, O = sp.out_channels;
  const T* w = params.learned[0].data();
  LayerGradients<T> g;
  g.input = BasicTensor<T>(x.shape());
  std::vector<double> gw(O * I, 0.0), gb(O, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    const T* xs = x.data() + n * I;
    const T* gs = gy.data() + n * O;
    for (std::size_t i = 0; i < I; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < O; ++o) acc += static_cast<double>(w[o * I + i]) * static_cast<double>(gs[o]);
      g.input[n * I + i] = static_cast<T>(acc);
    }
    for (std::size_t o = 0; o < O; ++o) {
      const double go = static_cast<double>(gs[o]);
      gb[o] += go;
      for (std::size_t i = 0; i < I; ++i) gw[o * I + i] += go * static_cast<double>(xs[i]);
    }
  }
  g.params.emplace_back(params.learned[0].shape(), std::vector<T>(gw.begin(), gw.end()));
  g.params.emplace_back(params.learned[1].shape(), std::vector<T>(gb.begin(), gb.end()));
  return g;
}

// Batch-norm views any input as [N, C, S] with S = spatial size (1 for dense features).
inline void bn_dims(const Shape& s, std::size_t& N, std::size_t& C, std::size_t& S) {
  N = s[0];
  C = s[1];
  S = s.size() == 4 ? s[2] * s[3] : 1;
}

template <typename T>
BasicTensor<T> forward_bn(const LayerSpec& sp, LayerParams<T>& params, ForwardContext<T>& ctx, const BasicTensor<T>& x,
                          Mode mode) {
  std::size_t N, C, S;
  bn_dims(x.shape(), N, C, S);
  const T* gamma = params.learned[0].data();
  const T* beta = params.learned[1].data();
  T* rmean = params.buffers[0].data();
  T* rvar = params.buffers[1].data();
  const double M = static_cast<double>(N * S);
  BasicTensor<T> y(x.shape());
  ctx.normalized.assign(x.size(), 0.0);
  ctx.inv_std.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      double sum = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* xs = x.data() + (n * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) sum += static_cast<double>(xs[i]);
      }
      mean = sum / M;
      double sq = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* xs = x.data() + (n * C + c) * S;
        for (std::size_t i = 0; i < S; ++i) {
          const double d = static_cast<double>(xs[i]) - mean;
          sq += d * d;
        }
      }
      var = sq / M;
      rmean[c] = static_cast<T>(sp.bn_momentum * static_cast<double>(rmean[c]) + (1.0 - sp.bn_momentum) * mean);
      rvar[c] = static_cast<T>(sp.bn_momentum * static_cast<double>(rvar[c]) + (1.0 - sp.bn_momentum) * var);
    } else {
      mean = static_cast<double>(rmean[c]);
      var = std::max(0.0, static_cast<double>(rvar[c]));
    }
    const double inv = 1.0 / std::sqrt(var + sp.bn_epsilon);
    ctx.inv_std[c] = inv;
    const double gm = static_cast<double>(gamma[c]), bt = static_cast<double>(beta[c]);
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const double xh = (static_cast<double>(x[off + i]) - mean) * inv;
        ctx.normalized[off + i] = xh;
        y[off + i] = static_cast<T>(gm * xh + bt);
      }
    }
  }
  return y;
}

template <typename T>
LayerGradients<T> backward_bn(const LayerParams<T>& params, const ForwardContext<T>& ctx, const BasicTensor<T>& gy) {
  std::size_t N, C, S;
  bn_dims(gy.shape(), N, C, S);
  const T* gamma = params.learned[0].data();
  const double M = static_cast<double>(N * S);
  LayerGradients<T> g;
  g.input = BasicTensor<T>(gy.shape());
  BasicTensor<T> ggamma({C}), gbeta({C});
  for (std::size_t c = 0; c < C; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const double gv = static_cast<double>(gy[off + i]);
        sum_g += gv;
        sum_gx += gv * ctx.normalized[off + i];
      }
    }
    ggamma[c] = static_cast<T>(sum_gx);
    gbeta[c] = static_cast<T>(sum_g);
    const double gm = static_cast<double>(gamma[c]);
    const double inv = ctx.inv_std[c];
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) {
        const double gv = static_cast<double>(gy[off + i]);
        double gx;
        if (ctx.mode == Mode::train) {
          // batch statistics depend on every input of the channel
          gx = gm * inv / M * (M * gv - sum_g - ctx.normalized[off + i] * sum_gx);
        } else {
          gx = gm * inv * gv;
        }
        g.input[off + i] = static_cast<T>(gx);
      }
    }
  }
  g.params.push_back(std::move(ggamma));
  g.params.push_back(std::move(gbeta));
  return g;
}

}  // namespace detail

/// Runs one layer forward on a batched input and records what backward needs.
/// `rng` is only consulted by dropout in train mode.
template <typename T>
BasicTensor<T> forward_layer(const LayerSpec& spec, LayerParams<T>& params, ForwardContext<T>& ctx,
                             const BasicTensor<T>& input, Mode mode, Rng* rng = nullptr) {
  detail::check_input(spec, params, input);
  ctx.valid = false;
  ctx.mode = mode;
  ctx.mask.clear();
  BasicTensor<T> out;
  switch (spec.kind) {
    case LayerKind::conv2d: out = detail::forward_conv(spec, params, input); break;
    case LayerKind::dense: out = detail::forward_dense(spec, params, input); break;
    case LayerKind::batch_norm: out = detail::forward_bn(spec, params, ctx, input, mode); break;
    case LayerKind::relu:
      out = input;
      for (auto& v : out.values()) v = v > T{0} ? v : T{0};
      break;
    case LayerKind::global_avg_pool: {
      const std::size_t N = input.dim(0), C = input.dim(1), S = input.dim(2) * input.dim(3);
      out = BasicTensor<T>({N, C});
      for (std::size_t nc = 0; nc < N * C; ++nc) {
        double acc = 0.0;
        const T* p = input.data() + nc * S;
        for (std::size_t i = 0; i < S; ++i) acc += static_cast<double>(p[i]);
        out[nc] = static_cast<T>(acc / static_cast<double>(S));
      }
      break;
    }
    case LayerKind::dropout:
      out = input;
      if (mode == Mode::train && spec.dropout_rate > 0.0) {
        if (rng == nullptr) {
          detail::fail(ErrorCategory::state, detail::kTensorCore, "layer ", spec.describe(),
                       " needs a random stream in train mode");
        }
        const double keep = 1.0 - spec.dropout_rate;
        const T scale = static_cast<T>(1.0 / keep);
        ctx.mask.resize(input.size());
        for (std::size_t i = 0; i < input.size(); ++i) {
          ctx.mask[i] = rng->bernoulli(keep) ? scale : T{0};
          out[i] = input[i] * ctx.mask[i];
        }
      }
      break;
  }
  ctx.input = input;
  ctx.output_shape = out.shape();
  ctx.valid = true;
  return out;
}

template <typename T>
BasicTensor<T> forward_layer(const LayerSpec& spec, LayerState<T>& state, const BasicTensor<T>& input, Mode mode,
                             Rng* rng = nullptr) {
  return forward_layer(spec, state.params, state.context, input, mode, rng);
}

/// Analytic gradients of the last forward call. Learned parameters are not modified.
template <typename T>
LayerGradients<T> backward_layer(const LayerSpec& spec, const LayerParams<T>& params, const ForwardContext<T>& ctx,
                                 const BasicTensor<T>& grad_output) {
  if (!ctx.valid) {
    detail::fail(ErrorCategory::state, detail::kTensorCore, "backward called before forward on layer ", spec.describe());
  }
  if (grad_output.shape() != ctx.output_shape) {
    detail::fail(ErrorCategory::shape, detail::kTensorCore, "layer ", spec.describe(), " grad_output ",
                 shape_string(grad_output.shape()), " does not match forward output ", shape_string(ctx.output_shape));
  }
  const BasicTensor<T>& x = ctx.input;
  LayerGradients<T> g;
  switch (spec.kind) {
    case LayerKind::conv2d: return detail::backward_conv(spec, params, x, grad_output);
    case LayerKind::dense: return detail::backward_dense(spec, params, x, grad_output);
    case LayerKind::batch_norm: return detail::backward_bn(params, ctx, grad_output);
    case LayerKind::relu:
      g.input = grad_output;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] > T{0})) g.input[i] = T{0};
      return g;
    case LayerKind::global_avg_pool: {
      g.input = BasicTensor<T>(x.shape());
      const std::size_t S = x.dim(2) * x.dim(3);
      const double inv = 1.0 / static_cast<double>(S);
      for (std::size_t nc = 0; nc < grad_output.size(); ++nc) {
        const T v = static_cast<T>(static_cast<double>(grad_output[nc]) * inv);
        std::fill_n(g.input.data() + nc * S, S, v);
      }
      return g;
    }
    case LayerKind::dropout:
      g.input = grad_output;
      if (!ctx.mask.empty())
        for (std::size_t i = 0; i < g.input.size(); ++i) g.input[i] *= ctx.mask[i];
      return g;
  }
  return g;
}

template <typename T>
LayerGradients<T> backward_layer(const LayerSpec& spec, const LayerState<T>& state, const BasicTensor<T>& grad_output) {
  return backward_layer(spec, state.params, state.context, grad_output);
}

}  // namespace scnn
