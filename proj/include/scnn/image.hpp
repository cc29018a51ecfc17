#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scnn/error.hpp"
#include "scnn/tensor.hpp"

namespace scnn {

inline constexpr int kUnknownLabel = -1;
inline constexpr int kMaxLabel = 4;

/// Three-channel image, row-major interleaved (y, x, channel), values in [0,1].
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  static constexpr std::size_t channels = 3;

  RawImage() = default;
  RawImage(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), pixels(h * w * channels, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

  float intensity(std::size_t y, std::size_t x) const {
    const float* p = &pixels[(y * width + x) * channels];
    return (p[0] + p[1] + p[2]) / 3.0f;
  }

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

struct LabeledImage {
  std::string id;
  RawImage image;
  int label = kUnknownLabel;
  std::string parent_id;  // non-empty for augmented copies

  bool derived() const { return !parent_id.empty(); }
};

using Dataset = std::vector<LabeledImage>;

/// Planar [3, H, W] tensor view of an image for the network.
inline Tensor to_tensor(const RawImage& img) {
  Tensor t({RawImage::channels, img.height, img.width});
  for (std::size_t c = 0; c < RawImage::channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) t[(c * img.height + y) * img.width + x] = img.at(y, x, c);
  return t;
}

/// Stacks images into a batch [N, 3, H, W]; all images must share dimensions.
inline Tensor to_batch(const std::vector<const RawImage*>& images) {
  if (images.empty()) detail::fail(ErrorCategory::shape, "imaging", "cannot batch zero images");
  const std::size_t h = images[0]->height, w = images[0]->width, plane = 3 * h * w;
  Tensor t({images.size(), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const RawImage& img = *images[n];
    if (img.height != h || img.width != w) {
      detail::fail(ErrorCategory::shape, "imaging", "batch mixes ", h, "x", w, " and ", img.height, "x", img.width, " images");
    }
    float* dst = t.data() + n * plane;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t c = 0; c < 3; ++c) dst[(c * h + y) * w + x] = img.at(y, x, c);
  }
  return t;
}

inline std::map<int, std::size_t> class_counts(const Dataset& ds) {
  std::map<int, std::size_t> counts;
  for (const auto& item : ds) ++counts[item.label];
  return counts;
}

inline void check_unique_ids(const Dataset& ds, const char* module) {
  std::set<std::string> seen;
  for (const auto& item : ds) {
    if (!seen.insert(item.id).second) detail::fail(ErrorCategory::data, module, "duplicate id '", item.id, "'");
  }
}

}  // namespace scnn
