#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "scnn/image.hpp"

namespace scnn {

namespace detail {

inline constexpr const char* kImaging = "imaging";

// reflect-101 indexing: ... 2 1 | 0 1 2 ... n-1 | n-2 ...
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (static_cast<std::ptrdiff_t>(n) - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

// continuous counterpart of reflect_index for resampling coordinates
inline double reflect_coord(double u, std::size_t n) {
  if (n == 1) return 0.0;
  const double period = 2.0 * static_cast<double>(n - 1);
  u = std::fmod(u, period);
  if (u < 0) u += period;
  if (u > static_cast<double>(n - 1)) u = period - u;
  return u;
}

inline float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

inline float sample_bilinear(const RawImage& img, double y, double x, std::size_t c) {
  const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const double ty = y - static_cast<double>(y0), tx = x - static_cast<double>(x0);
  const double a = img.at(y0, x0, c), b = img.at(y0, x1, c);
  const double d = img.at(y1, x0, c), e = img.at(y1, x1, c);
  const double top = a + tx * (b - a);
  const double bottom = d + tx * (e - d);
  return static_cast<float>(top + ty * (bottom - top));
}

}  // namespace detail

/// Normalized, truncated (radius ceil(3 sigma)) Gaussian weights for offsets -r..r.
inline std::vector<double> gaussian_kernel(double sigma) {
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with reflect padding. sigma <= 0 returns the input.
inline RawImage gaussian_blur(const RawImage& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const std::vector<double> k = gaussian_kernel(sigma);
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  const std::size_t H = img.height, W = img.width;
  std::vector<double> tmp(H * W * 3);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -r; i <= r; ++i)
          acc += k[static_cast<std::size_t>(i + r)] *
                 img.at(y, detail::reflect_index(static_cast<std::ptrdiff_t>(x) + i, W), c);
        tmp[(y * W + x) * 3 + c] = acc;
      }
  RawImage out(H, W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -r; i <= r; ++i)
          acc += k[static_cast<std::size_t>(i + r)] *
                 tmp[(detail::reflect_index(static_cast<std::ptrdiff_t>(y) + i, H) * W + x) * 3 + c];
        out.at(y, x, c) = detail::clamp01(acc);
      }
  return out;
}

/// Bilinear resize with half-pixel-centred sampling.
inline RawImage resize_bilinear(const RawImage& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) detail::fail(ErrorCategory::range, detail::kImaging, "resize target must be at least 1x1");
  if (out_h == img.height && out_w == img.width) return img;
  RawImage out(out_h, out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double src_y = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    for (std::size_t x = 0; x < out_w; ++x) {
      const double src_x = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = detail::sample_bilinear(img, src_y, src_x, c);
    }
  }
  return out;
}

/// Radius of the bright circular field: for each row whose peak exceeds 10% of
/// the image peak, the span between the first and last pixel above 10% of the
/// row peak; the radius is half the widest span.
inline double estimate_field_radius(const RawImage& img, const std::string& id = {}) {
  float global_max = 0.0f;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) global_max = std::max(global_max, img.intensity(y, x));
  std::size_t best = 0;
  if (global_max > 1e-3f) {
    for (std::size_t y = 0; y < img.height; ++y) {
      float row_max = 0.0f;
      for (std::size_t x = 0; x < img.width; ++x) row_max = std::max(row_max, img.intensity(y, x));
      if (row_max < 0.1f * global_max) continue;
      const float thr = 0.1f * row_max;
      std::size_t first = img.width, last = 0;
      for (std::size_t x = 0; x < img.width; ++x) {
        if (img.intensity(y, x) > thr) {
          first = std::min(first, x);
          last = x;
        }
      }
      if (first < img.width) best = std::max(best, last - first + 1);
    }
  }
  if (best == 0) {
    detail::fail(ErrorCategory::data, detail::kImaging, "radius estimation failed for image '", id,
                 "': no row with intensity above threshold");
  }
  return static_cast<double>(best) / 2.0;
}

/// Rescales the image so the estimated field radius becomes target_radius.
/// Interpolation softens the rim, so the scale is corrected against the
/// radius re-measured on the output; the closest of a few rounds is kept.
inline RawImage normalize_radius(const RawImage& img, double target_radius, const std::string& id = {}) {
  if (!(target_radius > 0.0)) detail::fail(ErrorCategory::range, detail::kImaging, "target radius must be > 0");
  double scale = target_radius / estimate_field_radius(img, id);
  RawImage best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 6; ++round) {
    const auto h = static_cast<std::size_t>(std::max(1.0, std::round(static_cast<double>(img.height) * scale)));
    const auto w = static_cast<std::size_t>(std::max(1.0, std::round(static_cast<double>(img.width) * scale)));
    RawImage out = resize_bilinear(img, h, w);
    const double measured = estimate_field_radius(out, id);
    const double err = std::abs(measured - target_radius);
    if (err < best_err) {
      best_err = err;
      best = std::move(out);
    }
    if (best_err <= 0.5) break;
    scale *= target_radius / measured;
  }
  return best;
}

inline constexpr double kLocalAverageGain = 4.0;

/// clip(4 * (img - blur(img, sigma)) + 0.5, 0, 1)
inline RawImage subtract_local_average(const RawImage& img, double sigma) {
  if (!(sigma > 0.0)) detail::fail(ErrorCategory::range, detail::kImaging, "local average sigma must be > 0");
  const RawImage blurred = gaussian_blur(img, sigma);
  RawImage out(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = detail::clamp01(kLocalAverageGain * (static_cast<double>(img.pixels[i]) - blurred.pixels[i]) + 0.5);
  }
  return out;
}

/// Keeps the centred round(dim * keep_fraction) region of each axis.
inline RawImage central_crop(const RawImage& img, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    detail::fail(ErrorCategory::range, detail::kImaging, "keep_fraction must be in (0,1], got ", keep_fraction);
  }
  const auto h = static_cast<std::size_t>(std::llround(static_cast<double>(img.height) * keep_fraction));
  const auto w = static_cast<std::size_t>(std::llround(static_cast<double>(img.width) * keep_fraction));
  if (h < 1 || w < 1) detail::fail(ErrorCategory::range, detail::kImaging, "central crop is smaller than one pixel");
  const std::size_t oy = (img.height - h) / 2, ox = (img.width - w) / 2;
  RawImage out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y + oy, x + ox, c);
  return out;
}

struct PreprocessConfig {
  double target_radius = 150.0;
  double keep_fraction = 0.9;
  std::size_t output_size = 32;
  double local_sigma_fraction = 1.0 / 30.0;  // sigma = target_radius * fraction
  bool subtract_local = true;
};

/// normalize_radius -> subtract_local_average -> central_crop -> resize_bilinear
inline RawImage preprocess_image(const RawImage& img, const PreprocessConfig& cfg, const std::string& id = {}) {
  RawImage out = normalize_radius(img, cfg.target_radius, id);
  if (cfg.subtract_local) out = subtract_local_average(out, cfg.target_radius * cfg.local_sigma_fraction);
  out = central_crop(out, cfg.keep_fraction);
  return resize_bilinear(out, cfg.output_size, cfg.output_size);
}

}  // namespace scnn
