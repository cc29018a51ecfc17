#include <cmath>
#include <fstream>

#include "helpers.hpp"

using namespace scnn;
using testutil::expect_error;
using testutil::random_tensor;

namespace {

NetworkSpec small_spec(std::size_t size = 8, std::size_t dim = 6) {
  return default_network_spec(size, dim, 4, 0.25, 1);
}

}  // namespace

TEST(NetworkSpec, DefaultIsValidAndShapesChain) {
  const NetworkSpec s = default_network_spec();
  EXPECT_NO_THROW(s.validate());
  const auto shapes = s.layer_shapes();
  EXPECT_EQ(shapes.back(), (Shape{32}));
}

TEST(NetworkSpec, IncompatibleLayersNamed) {
  NetworkSpec s = small_spec();
  s.layers.back() = LayerSpec::dense(5, 6);
  const std::string msg = expect_error([&] { s.validate(); }, ErrorCategory::config);
  EXPECT_NE(msg.find("dense(5->6)"), std::string::npos) << msg;
  EXPECT_NE(msg.find("global_avg_pool"), std::string::npos) << msg;
}

TEST(NetworkSpec, EmbeddingDimMustMatchOutput) {
  NetworkSpec s = small_spec();
  s.embedding_dim = 7;
  expect_error([&] { s.validate(); }, ErrorCategory::config);
}

TEST(BuildNetwork, SameSeedBitwiseIdentical) {
  const NetworkSpec s = small_spec();
  EXPECT_EQ(build_network(s, 5).parameters(), build_network(s, 5).parameters());
  EXPECT_FALSE(build_network(s, 5).parameters() == build_network(s, 6).parameters());
}

TEST(BuildNetwork, BatchNormStartsAtIdentity) {
  const NetworkSpec s = default_network_spec();
  const Network net = build_network(s, 1);
  for (std::size_t i = 0; i < s.layers.size(); ++i) {
    if (s.layers[i].kind != LayerKind::batch_norm) continue;
    const auto& p = net.parameters().layers[i];
    for (float g : p.learned[0].values()) EXPECT_EQ(g, 1.0f);
    for (float b : p.learned[1].values()) EXPECT_EQ(b, 0.0f);
  }
}

TEST(BuildNetwork, HeVarianceOfConvWeights) {
  NetworkSpec s;
  s.input_shape = {64, 4, 4};
  s.layers = {LayerSpec::conv2d(64, 64, 3, 1, 1), LayerSpec::global_avg_pool()};
  s.embedding_dim = 64;
  const Network net = build_network(s, 3);
  const Tensor& w = net.parameters().layers[0].learned[0];
  ASSERT_GE(w.size(), 10000u);
  double s1 = 0, s2 = 0;
  for (float v : w.values()) {
    s1 += v;
    s2 += static_cast<double>(v) * v;
  }
  const double mean = s1 / w.size(), var = s2 / w.size() - mean * mean;
  const double expect = 2.0 / (64 * 9);
  EXPECT_LT(std::abs(var - expect) / expect, 0.2);
}

TEST(Network, InferIsDeterministicAndTwinsAgree) {
  Network net = build_network(small_spec(), 2);
  Network twin = net.twin();
  Rng rng(1);
  const Tensor img = random_tensor(Shape{3, 8, 8}, rng, 0, 1);
  const Tensor a = embed(net, img), b = embed(net, img), c = embed(twin, img);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(a.shape(), (Shape{6}));
  EXPECT_EQ(net.shared_store(), twin.shared_store());
}

TEST(Network, OutputLengthIsEmbeddingDim) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t size = 4 + rng.below(8), dim = 1 + rng.below(40), ch = 1 + rng.below(6), blocks = rng.below(3);
    Network net = build_network(default_network_spec(size, dim, ch, 0.25, blocks), trial);
    const Tensor batch = random_tensor(Shape{3, 3, size, size}, rng, 0, 1);
    EXPECT_EQ(net.infer(batch).shape(), (Shape{3, dim}));
  }
}

TEST(Network, RejectsWrongInputShape) {
  Network net = build_network(small_spec(), 2);
  expect_error([&] { net.infer(Tensor({1, 3, 9, 8})); }, ErrorCategory::shape);
  expect_error([&] { embed(net, Tensor({3, 8})); }, ErrorCategory::shape);
}

TEST(Network, BackwardMatchesDirectionalDerivative) {
  // a linear residual stack: finite differences are exact up to float rounding
  NetworkSpec s;
  s.input_shape = {2, 5, 5};
  s.layers = {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::conv2d(3, 3, 3, 1, 1), LayerSpec::conv2d(3, 3, 1),
              LayerSpec::global_avg_pool(), LayerSpec::dense(3, 4)};
  s.residual_blocks = {{1, 2}};
  s.embedding_dim = 4;
  Network net = build_network(s, 4);
  Rng rng(6);
  const Tensor x = random_tensor(Shape{2, 2, 5, 5}, rng);
  const Tensor r = random_tensor(Shape{2, 4}, rng);
  auto loss = [&] {
    const Tensor y = net.forward(x, Mode::train);
    double acc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += static_cast<double>(y[i]) * r[i];
    return acc;
  };
  loss();
  const NetworkGradients g = net.backward(r);
  auto params = net.learned_parameters();
  std::vector<Tensor> dir;
  double analytic = 0;
  std::size_t flat = 0;
  for (std::size_t l = 0; l < g.size(); ++l)
    for (const Tensor& t : g[l]) {
      Tensor d = random_tensor(t.shape(), rng);
      for (std::size_t k = 0; k < t.size(); ++k) analytic += static_cast<double>(t[k]) * d[k];
      dir.push_back(std::move(d));
      ++flat;
    }
  ASSERT_EQ(flat, params.size());
  const double eps = 1e-2;
  auto shift = [&](double sgn) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t k = 0; k < params[i]->size(); ++k) (*params[i])[k] += static_cast<float>(sgn * eps * dir[i][k]);
  };
  shift(1);
  const double lp = loss();
  shift(-2);
  const double lm = loss();
  shift(1);
  const double numeric = (lp - lm) / (2 * eps);
  EXPECT_LT(std::abs(analytic - numeric) / std::max(std::abs(analytic), 1e-3), 1e-3) << analytic << " vs " << numeric;
}

TEST(Checkpoint, RoundTripBitwise) {
  Network net = build_network(small_spec(), 9);
  Rng rng(3);
  // move batch-norm buffers off their defaults
  net.forward(random_tensor(Shape{4, 3, 8, 8}, rng, 0, 1), Mode::train, &rng);
  const auto dir = testutil::scratch_dir("ckpt");
  const std::string path = (dir / "net.snet").string();
  save_checkpoint(net, path);
  Network back = load_checkpoint(path);
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_EQ(back.parameters(), net.parameters());
  const Tensor img = random_tensor(Shape{3, 8, 8}, rng, 0, 1);
  EXPECT_EQ(embed(back, img), embed(net, img));
}

TEST(Checkpoint, FreshNetworkEqualsRebuild) {
  const NetworkSpec s = small_spec();
  EXPECT_EQ(serialize_checkpoint(build_network(s, 17)), serialize_checkpoint(build_network(s, 17)));
  EXPECT_EQ(deserialize_checkpoint(serialize_checkpoint(build_network(s, 17))).parameters(),
            build_network(s, 17).parameters());
}

TEST(Checkpoint, CorruptionRejected) {
  const auto bytes = serialize_checkpoint(build_network(small_spec(), 1));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_error([&] { deserialize_checkpoint(bad_magic); }, ErrorCategory::format);
  auto bad_version = bytes;
  bad_version[4] = 99;
  expect_error([&] { deserialize_checkpoint(bad_version); }, ErrorCategory::format);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  const std::string msg = expect_error([&] { deserialize_checkpoint(truncated); }, ErrorCategory::format);
  EXPECT_NE(msg.find("truncated"), std::string::npos);
  auto trailing = bytes;
  trailing.push_back(0);
  expect_error([&] { deserialize_checkpoint(trailing); }, ErrorCategory::format);
  expect_error([] { load_checkpoint("/nonexistent/net.snet"); }, ErrorCategory::io);
}
