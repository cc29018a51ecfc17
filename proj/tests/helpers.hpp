#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "scnn/scnn.hpp"

namespace testutil {

template <typename T = float>
scnn::BasicTensor<T> random_tensor(scnn::Shape shape, scnn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  scnn::BasicTensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// runs f, requires an scnn::Error of the given category; returns its message
template <typename F>
std::string expect_error(F&& f, scnn::ErrorCategory cat) {
  try {
    f();
  } catch (const scnn::Error& e) {
    EXPECT_EQ(e.category(), cat) << e.what();
    return e.message();
  }
  ADD_FAILURE() << "expected an scnn::Error (" << scnn::to_string(cat) << ")";
  return {};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("scnn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
