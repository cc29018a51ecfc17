#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "scnn/binary_io.hpp"
#include "scnn/network.hpp"

namespace scnn {

// Layout (all little-endian):
//   "SNET" | version u32 | spec | per layer: learned tensors then buffers
// spec:   C,H,W u32 | embedding_dim u32 | layer count u32 | layers | residual count u32 | (start,end) u32 pairs
// layer:  kind u8 | in,out,kernel,stride,padding u32 | dropout,bn_eps,bn_momentum f64
// tensor: rank u32 | dims u32... | f32 data
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_tensor(ByteWriter& w, const Tensor& t) {
  w.put(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.put(static_cast<std::uint32_t>(d));
  for (float v : t.values()) w.put(v);
}

inline Tensor get_tensor(ByteReader& r, const Shape& expected) {
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) r.corrupt("implausible tensor rank");
  Shape shape(rank);
  for (auto& d : shape) d = r.get<std::uint32_t>();
  if (shape != expected) r.corrupt("tensor shape " + shape_string(shape) + " does not match spec " + shape_string(expected));
  if (r.remaining() / sizeof(float) < shape_size(shape)) r.corrupt("truncated file");
  std::vector<float> data(shape_size(shape));
  for (auto& v : data) v = r.get<float>();
  return Tensor(shape, std::move(data));
}

inline void put_spec(ByteWriter& w, const NetworkSpec& spec) {
  for (std::size_t d : spec.input_shape) w.put(static_cast<std::uint32_t>(d));
  w.put(static_cast<std::uint32_t>(spec.embedding_dim));
  w.put(static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    w.put(static_cast<std::uint8_t>(l.kind));
    for (std::size_t v : {l.in_channels, l.out_channels, l.kernel, l.stride, l.padding}) w.put(static_cast<std::uint32_t>(v));
    w.put(l.dropout_rate);
    w.put(l.bn_epsilon);
    w.put(l.bn_momentum);
  }
  w.put(static_cast<std::uint32_t>(spec.residual_blocks.size()));
  for (auto [s, e] : spec.residual_blocks) {
    w.put(static_cast<std::uint32_t>(s));
    w.put(static_cast<std::uint32_t>(e));
  }
}

inline NetworkSpec get_spec(ByteReader& r) {
  NetworkSpec spec;
  spec.input_shape.resize(3);
  for (auto& d : spec.input_shape) d = r.get<std::uint32_t>();
  spec.embedding_dim = r.get<std::uint32_t>();
  const auto n = r.get<std::uint32_t>();
  if (n > 10000) r.corrupt("implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    LayerSpec l;
    const auto kind = r.get<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(LayerKind::dropout)) r.corrupt("unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.in_channels = r.get<std::uint32_t>();
    l.out_channels = r.get<std::uint32_t>();
    l.kernel = r.get<std::uint32_t>();
    l.stride = r.get<std::uint32_t>();
    l.padding = r.get<std::uint32_t>();
    l.dropout_rate = r.get<double>();
    l.bn_epsilon = r.get<double>();
    l.bn_momentum = r.get<double>();
    spec.layers.push_back(l);
  }
  const auto nres = r.get<std::uint32_t>();
  if (nres > 10000) r.corrupt("implausible residual block count");
  for (std::uint32_t i = 0; i < nres; ++i) {
    const std::size_t s = r.get<std::uint32_t>();
    const std::size_t e = r.get<std::uint32_t>();
    spec.residual_blocks.emplace_back(s, e);
  }
  return spec;
}

}  // namespace detail

inline std::vector<unsigned char> serialize_checkpoint(const Network& net) {
  detail::ByteWriter w;
  w.put_bytes("SNET", 4);
  w.put(kCheckpointVersion);
  detail::put_spec(w, net.spec());
  for (const auto& layer : net.parameters().layers) {
    for (const auto& t : layer.learned) detail::put_tensor(w, t);
    for (const auto& t : layer.buffers) detail::put_tensor(w, t);
  }
  return w.bytes();
}

inline void save_checkpoint(const Network& net, const std::string& path) {
  detail::write_file_bytes(path, serialize_checkpoint(net), "network");
}

inline Network deserialize_checkpoint(std::vector<unsigned char> bytes, const std::string& source = "<memory>") {
  detail::ByteReader r(std::move(bytes), "network", source);
  if (r.get_raw(4) != "SNET") r.corrupt("bad magic, not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.corrupt("unsupported checkpoint version " + std::to_string(version));
  NetworkSpec spec = detail::get_spec(r);
  try {
    spec.validate();
  } catch (const Error& e) {
    r.corrupt("invalid network spec: " + e.message());
  }
  // a freshly initialized store provides the expected tensor shapes
  Network net = build_network(spec, 0);
  for (auto& layer : net.parameters().layers) {
    for (auto& t : layer.learned) t = detail::get_tensor(r, t.shape());
    for (auto& t : layer.buffers) t = detail::get_tensor(r, t.shape());
  }
  if (!r.at_end()) r.corrupt("trailing bytes after parameters");
  return net;
}

inline Network load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(detail::read_file_bytes(path, "network"), path);
}

}  // namespace scnn
