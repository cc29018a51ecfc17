#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "scnn/image.hpp"
#include "scnn/random.hpp"

namespace scnn {

/// Knobs of the synthetic ordinal-severity generator. Images are a bright
/// disk (the fundus field) on a dark background carrying
/// blobs_per_level * label + U{-jitter..jitter} small dark lesions
/// (zero for label 0), plus per-image brightness/tint variation and pixel noise.
struct SyntheticOptions {
  int blobs_per_level = 3;
  int blob_count_jitter = 1;
  double field_radius_fraction = 0.42;  // of image size
  double blob_radius_fraction = 1.0 / 22.0;
  double blob_darkness = 0.75;
  double brightness_min = 0.6;
  double brightness_max = 1.0;
  double pixel_noise = 0.02;
};

struct SyntheticImage {
  RawImage image;
  int blob_count = 0;
};

inline SyntheticImage render_synthetic(int label, std::size_t size, Rng& rng, const SyntheticOptions& opt = {}) {
  const double s = static_cast<double>(size);
  const double cy = (s - 1.0) / 2.0 + rng.uniform(-0.03, 0.03) * s;
  const double cx = (s - 1.0) / 2.0 + rng.uniform(-0.03, 0.03) * s;
  const double radius = opt.field_radius_fraction * s * rng.uniform(0.92, 1.0);
  const double brightness = rng.uniform(opt.brightness_min, opt.brightness_max);
  const double tint[3] = {0.85 * rng.uniform(0.9, 1.1), 0.45 * rng.uniform(0.8, 1.2), 0.25 * rng.uniform(0.8, 1.2)};

  int blobs = 0;
  if (label > 0) {
    blobs = opt.blobs_per_level * label + static_cast<int>(rng.between(-opt.blob_count_jitter, opt.blob_count_jitter));
    blobs = std::max(blobs, 1);
  }
  struct Blob {
    double y, x, r;
  };
  std::vector<Blob> lesions;
  for (int b = 0; b < blobs; ++b) {
    const double rho = 0.75 * radius * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    lesions.push_back({cy + rho * std::sin(phi), cx + rho * std::cos(phi),
                       opt.blob_radius_fraction * s * rng.uniform(0.8, 1.2)});
  }

  SyntheticImage out{RawImage(size, size), blobs};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double d2 = dy * dy + dx * dx;
      double field = 0.0;
      if (d2 <= radius * radius) {
        field = brightness * (1.0 - 0.3 * d2 / (radius * radius));
        for (const Blob& l : lesions) {
          const double ly = static_cast<double>(y) - l.y, lx = static_cast<double>(x) - l.x;
          field *= 1.0 - opt.blob_darkness * std::exp(-(ly * ly + lx * lx) / (l.r * l.r));
        }
      }
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = field * tint[c] + rng.normal(0.0, opt.pixel_noise);
        out.image.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

/// `per_class` images for each label in [0, classes), ids "syn_<label>_<index>".
/// Each image draws from its own stream derived from (seed, label, index).
inline Dataset generate_synthetic(int classes, std::size_t per_class, std::size_t size, std::uint64_t seed,
                                  const SyntheticOptions& opt = {}) {
  if (classes < 2) detail::fail(ErrorCategory::range, "imaging", "synthetic dataset needs at least 2 classes");
  if (per_class < 1) detail::fail(ErrorCategory::range, "imaging", "synthetic dataset needs per_class >= 1");
  if (size < 8) detail::fail(ErrorCategory::range, "imaging", "synthetic image size must be >= 8");
  Dataset ds;
  for (int label = 0; label < classes; ++label) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(label), i}));
      LabeledImage item;
      item.id = "syn_" + std::to_string(label) + "_" + std::to_string(i);
      item.label = label;
      item.image = render_synthetic(label, size, rng, opt).image;
      ds.push_back(std::move(item));
    }
  }
  return ds;
}

}  // namespace scnn
