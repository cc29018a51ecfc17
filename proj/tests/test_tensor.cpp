#include <cmath>
#include <numeric>
#include <set>

#include "helpers.hpp"

using namespace scnn;
using testutil::expect_error;

TEST(Tensor, ShapeAndSize) {
  Tensor t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_TRUE(std::all_of(t.values().begin(), t.values().end(), [](float v) { return v == 1.5f; }));
}

TEST(Tensor, RejectsZeroDimsAndSizeMismatch) {
  expect_error([] { Tensor t({2, 0}); }, ErrorCategory::shape);
  expect_error([] { Tensor t({2, 2}, std::vector<float>(3)); }, ErrorCategory::shape);
  Tensor t({2, 3});
  expect_error([&] { t.reshape({4, 2}); }, ErrorCategory::shape);
  t.reshape({3, 2});
  EXPECT_EQ(t.shape(), (Shape{3, 2}));
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
}

TEST(L2Distance, ThreeFourFive) {
  const Tensor a = Tensor::vector({0, 0}), b = Tensor::vector({3, 4});
  EXPECT_DOUBLE_EQ(l2_distance(a, b), 5.0);
  EXPECT_EQ(l2_distance(b, b), 0.0);
}

TEST(L2Distance, MatchesNaiveSumOfSquares) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> a(64), b(64);
    for (auto& v : a) v = static_cast<float>(rng.normal(0, 3));
    for (auto& v : b) v = static_cast<float>(rng.normal(0, 3));
    long double s = 0;
    for (int i = 0; i < 64; ++i) s += (static_cast<long double>(a[i]) - b[i]) * (static_cast<long double>(a[i]) - b[i]);
    const double expect = static_cast<double>(std::sqrt(s));
    EXPECT_LT(std::abs(l2_distance(std::span<const float>(a), std::span<const float>(b)) - expect) / expect, 1e-6);
  }
}

TEST(L2Distance, Errors) {
  expect_error([] { l2_distance(Tensor::vector({1, 2}), Tensor::vector({1})); }, ErrorCategory::shape);
  expect_error([] { l2_distance(Tensor({1, 2}), Tensor({1, 2})); }, ErrorCategory::shape);
}

TEST(L2Distance, SymmetricAndTriangle) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = testutil::random_tensor(Shape{8}, rng), b = testutil::random_tensor(Shape{8}, rng),
         c = testutil::random_tensor(Shape{8}, rng);
    EXPECT_EQ(l2_distance(a, b), l2_distance(b, a));
    EXPECT_LE(l2_distance(a, c), l2_distance(a, b) + l2_distance(b, c) + 1e-12);
  }
}

TEST(Random, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(Rng(42).next_u64(), Rng(43).next_u64());
  EXPECT_NE(derive_seed(1, {0}), derive_seed(1, {1}));
  EXPECT_NE(derive_seed(1, {0, 1}), derive_seed(1, {1, 0}));
  EXPECT_EQ(derive_seed(9, {4, 5}), derive_seed(9, {4, 5}));
}

TEST(Random, RangesAndShuffle) {
  Rng rng(5);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
    sum += rng.normal();
  }
  EXPECT_NEAR(sum / 20000, 0.0, 0.05);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 50u);
}

TEST(Errors, CarryCategoryAndModule) {
  try {
    detail::fail(ErrorCategory::format, "retrieval", "bad ", 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::format);
    EXPECT_EQ(e.module(), "retrieval");
    EXPECT_EQ(e.message(), "bad 3");
    EXPECT_EQ(to_string(e.category()), "format");
  }
}
