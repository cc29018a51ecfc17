#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "scnn/preprocess.hpp"
#include "scnn/random.hpp"

namespace scnn {

struct AugmentSpec {
  std::size_t crop_offset_max = 0;  // pixels, each axis
  bool allow_hflip = false;
  bool allow_vflip = false;
  double blur_sigma_min = 0.0;
  double blur_sigma_max = 0.0;
  double rotation_min_deg = 0.0;
  double rotation_max_deg = 0.0;

  /// The augmentation recipe used for class balancing by default.
  static AugmentSpec standard() {
    AugmentSpec s;
    s.crop_offset_max = 2;
    s.allow_hflip = s.allow_vflip = true;
    s.blur_sigma_min = 0.0;
    s.blur_sigma_max = 0.8;
    s.rotation_min_deg = 0.0;
    s.rotation_max_deg = 360.0;
    return s;
  }

  void validate() const {
    auto bad = [](const char* what) { detail::fail(ErrorCategory::config, detail::kImaging, what); };
    if (!(blur_sigma_min >= 0.0 && blur_sigma_max >= blur_sigma_min)) bad("blur sigma range must satisfy 0 <= lo <= hi");
    if (!(rotation_min_deg >= 0.0 && rotation_max_deg <= 360.0 && rotation_min_deg <= rotation_max_deg)) {
      bad("rotation range must lie within [0, 360] with lo <= hi");
    }
  }
};

inline RawImage flip_horizontal(const RawImage& img) {
  RawImage out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

inline RawImage flip_vertical(const RawImage& img) {
  RawImage out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

/// Shifts the view window by (dy, dx); pixels outside the source are reflected.
inline RawImage offset_crop(const RawImage& img, std::ptrdiff_t dy, std::ptrdiff_t dx) {
  RawImage out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    const std::size_t sy = detail::reflect_index(static_cast<std::ptrdiff_t>(y) + dy, img.height);
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t sx = detail::reflect_index(static_cast<std::ptrdiff_t>(x) + dx, img.width);
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

/// Rotation about the image centre with bilinear resampling and reflect padding.
/// Output pixel p samples the source at c + R(theta) (p - c), with x to the
/// right and y down, so a 90 degree rotation maps out(y, x) = in(W-1-x, y) on
/// square images.
inline RawImage rotate(const RawImage& img, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  RawImage out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    const double ry = static_cast<double>(y) - cy;
    for (std::size_t x = 0; x < img.width; ++x) {
      const double rx = static_cast<double>(x) - cx;
      const double sx = detail::reflect_coord(cx + ca * rx + sa * ry, img.width);
      const double sy = detail::reflect_coord(cy - sa * rx + ca * ry, img.height);
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = detail::clamp01(detail::sample_bilinear(img, sy, sx, c));
    }
  }
  return out;
}

/// Random offset crop, optional flips, Gaussian blur and rotation, in that order.
inline RawImage augment(const RawImage& img, const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  RawImage out = img;
  if (spec.crop_offset_max > 0) {
    const auto m = static_cast<std::int64_t>(spec.crop_offset_max);
    const auto dy = rng.between(-m, m);
    const auto dx = rng.between(-m, m);
    if (dy != 0 || dx != 0) out = offset_crop(out, dy, dx);
  }
  if (spec.allow_hflip && rng.bernoulli(0.5)) out = flip_horizontal(out);
  if (spec.allow_vflip && rng.bernoulli(0.5)) out = flip_vertical(out);
  if (spec.blur_sigma_max > 0.0) {
    const double sigma = rng.uniform(spec.blur_sigma_min, spec.blur_sigma_max);
    if (sigma > 0.0) out = gaussian_blur(out, sigma);
  }
  if (spec.rotation_max_deg > 0.0) {
    const double angle = rng.uniform(spec.rotation_min_deg, spec.rotation_max_deg);
    if (angle != 0.0) out = rotate(out, angle);
  }
  return out;
}

/// Oversamples every class up to the size of the largest one. New items are
/// augmented copies of uniformly chosen original members of their class, with
/// ids "<parent>#aug<n>" and parent_id set. Originals are kept untouched.
/// When num_classes is given, every label in [0, num_classes) must be present.
inline Dataset balance_classes(const Dataset& dataset, const AugmentSpec& spec, Rng& rng,
                               std::optional<int> num_classes = std::nullopt) {
  spec.validate();
  check_unique_ids(dataset, detail::kImaging);
  std::map<int, std::vector<std::size_t>> originals;
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset[i];
    if (item.label == kUnknownLabel) {
      detail::fail(ErrorCategory::data, detail::kImaging, "cannot balance unlabeled item '", item.id, "'");
    }
    ++counts[item.label];
    if (!item.derived()) originals[item.label].push_back(i);
  }
  if (num_classes) {
    for (int c = 0; c < *num_classes; ++c)
      if (!counts.count(c)) detail::fail(ErrorCategory::data, detail::kImaging, "class ", c, " is empty");
  }
  std::size_t target = 0;
  for (auto [label, n] : counts) target = std::max(target, n);

  std::set<std::string> ids;
  for (const auto& item : dataset) ids.insert(item.id);

  Dataset out = dataset;
  for (auto [label, n] : counts) {
    const auto& members = originals[label];
    if (members.empty() && n < target) {
      detail::fail(ErrorCategory::data, detail::kImaging, "class ", label, " has no original items to augment");
    }
    std::size_t serial = 0;
    for (std::size_t k = n; k < target; ++k) {
      const LabeledImage& parent = dataset[members[rng.below(members.size())]];
      Rng item_rng(rng.next_u64());
      LabeledImage copy;
      do {
        copy.id = parent.id + "#aug" + std::to_string(serial++);
      } while (ids.count(copy.id));
      ids.insert(copy.id);
      copy.label = label;
      copy.parent_id = parent.id;
      copy.image = augment(parent.image, spec, item_rng);
      out.push_back(std::move(copy));
    }
  }
  return out;
}

/// Per-class train/test partition. Items are grouped with their augmentation
/// parent so near-duplicates never straddle the split. Each class gets
/// round(count * train_fraction) training items (half away from zero),
/// clamped to [1, count-1]; the count is exact when no class contains
/// multi-item parent groups, otherwise groups are filled greedily.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    detail::fail(ErrorCategory::range, detail::kImaging, "train_fraction must be in (0,1), got ", train_fraction);
  }
  check_unique_ids(dataset, detail::kImaging);
  // class -> root id -> member indices (ordered by first appearance)
  std::map<int, std::vector<std::pair<std::string, std::vector<std::size_t>>>> groups;
  std::map<int, std::map<std::string, std::size_t>> slot;
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset[i];
    const std::string& root = item.derived() ? item.parent_id : item.id;
    auto& cls = groups[item.label];
    auto [it, inserted] = slot[item.label].try_emplace(root, cls.size());
    if (inserted) cls.push_back({root, {}});
    cls[it->second].second.push_back(i);
    ++counts[item.label];
  }

  std::vector<bool> in_train(dataset.size(), false);
  for (auto& [label, cls] : groups) {
    const std::size_t n = counts[label];
    if (n < 2) {
      detail::fail(ErrorCategory::data, detail::kImaging, "class ", label, " has ", n,
                   " item(s); both splits need at least one");
    }
    auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    target = std::clamp<std::size_t>(target, 1, n - 1);
    std::vector<std::size_t> order(cls.size());
    for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
    rng.shuffle(order);
    std::size_t filled = 0;
    for (std::size_t g : order) {
      const auto& members = cls[g].second;
      if (filled + members.size() <= target) {
        filled += members.size();
        for (std::size_t i : members) in_train[i] = true;
      }
    }
  }
  Dataset train, test;
  for (std::size_t i = 0; i < dataset.size(); ++i) (in_train[i] ? train : test).push_back(dataset[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace scnn
