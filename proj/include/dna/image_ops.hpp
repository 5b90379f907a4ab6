// Copyright 2026 The DNA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DNA_IMAGE_OPS_HPP_
#define DNA_IMAGE_OPS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "dna/errors.hpp"
#include "dna/image.hpp"
#include "dna/rng.hpp"

namespace dna {

// The 15 deterministic augmentation operations. Magnitudes are scalars in
// [0,1] mapped affinely onto each operation's natural parameter range:
//
//   ShearX/Y     shear factor in [-0.3, 0.3]
//   TranslateX/Y shift in [-0.3, 0.3] * dimension, rounded to pixels
//   Rotate       degrees in [-180, 180]
//   Solarize     threshold = 1 - m (on the 256-level grid)
//   Posterize    bits = round(8 - 4m), in [4, 8]
//   Contrast/Color/Brightness/Sharpness  blend factor = 0.1 + 1.8m
//   Cutout       square side = round(20m) pixels
//   AutoContrast/Invert/Equalize         magnitude ignored
//
// Geometric ops use inverse-mapped nearest-neighbor resampling with
// out-of-bounds fill 0.5. Invert/Equalize/Solarize/Posterize operate on a
// 256-level quantization of [0,1] and rescale, which makes Invert an exact
// involution and Posterize exactly idempotent on byte-grid values.

enum class OpKind : int {
  kShearX = 0,
  kShearY = 1,
  kTranslateX = 2,
  kTranslateY = 3,
  kRotate = 4,
  kAutoContrast = 5,
  kInvert = 6,
  kEqualize = 7,
  kSolarize = 8,
  kPosterize = 9,
  kContrast = 10,
  kColor = 11,
  kBrightness = 12,
  kSharpness = 13,
  kCutout = 14,
};

inline constexpr int kNumOps = 15;

inline const char* op_name(OpKind k) {
  static const char* names[kNumOps] = {
      "ShearX",   "ShearY",   "TranslateX", "TranslateY", "Rotate",
      "AutoContrast", "Invert", "Equalize",  "Solarize",   "Posterize",
      "Contrast", "Color",    "Brightness", "Sharpness",  "Cutout"};
  return names[static_cast<int>(k)];
}

inline bool uses_magnitude(OpKind k) {
  switch (k) {
    case OpKind::kAutoContrast:
    case OpKind::kInvert:
    case OpKind::kEqualize:
      return false;
    default:
      return true;
  }
}

struct OpParam {
  double value = 0.0;
  const char* units = "";
  bool used = true;
};

inline void check_magnitude(double m) {
  if (!(m >= 0.0 && m <= 1.0))
    throw DomainError("magnitude " + std::to_string(m) + " outside [0,1]");
}

/// The affine magnitude-to-parameter map; a total function on [0,1].
inline OpParam magnitude_params(OpKind kind, double m) {
  check_magnitude(m);
  switch (kind) {
    case OpKind::kShearX:
    case OpKind::kShearY:
      return {(m - 0.5) * 0.6, "shear factor", true};
    case OpKind::kTranslateX:
    case OpKind::kTranslateY:
      return {(m - 0.5) * 0.6, "fraction of dimension", true};
    case OpKind::kRotate:
      return {(m - 0.5) * 360.0, "degrees", true};
    case OpKind::kSolarize:
      return {1.0 - m, "threshold", true};
    case OpKind::kPosterize:
      return {std::clamp(std::round(8.0 - 4.0 * m), 4.0, 8.0), "bits", true};
    case OpKind::kContrast:
    case OpKind::kColor:
    case OpKind::kBrightness:
    case OpKind::kSharpness:
      return {0.1 + 1.8 * m, "factor", true};
    case OpKind::kCutout:
      return {std::round(20.0 * m), "pixels", true};
    case OpKind::kAutoContrast:
    case OpKind::kInvert:
    case OpKind::kEqualize:
      return {0.0, "", false};
  }
  throw DomainError("unknown op kind");
}

namespace detail {

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

inline int to_byte(float v) {
  long b = std::lround(static_cast<double>(v) * 255.0);
  return static_cast<int>(std::clamp(b, 0l, 255l));
}

inline float from_byte(int b) { return static_cast<float>(b) / 255.0f; }

/// Inverse-mapped nearest-neighbor warp about the image center.
/// src = center + A * (dst - center) + t, fill 0.5 outside.
inline Image warp_nn(const Image& x, double a00, double a01, double a10, double a11,
                     double tx, double ty) {
  Image out(x.h, x.w, x.c, 0.5f);
  const double cx = (static_cast<double>(x.w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(x.h) - 1.0) / 2.0;
  for (std::size_t y = 0; y < x.h; ++y) {
    for (std::size_t xx = 0; xx < x.w; ++xx) {
      double dx = static_cast<double>(xx) - cx;
      double dy = static_cast<double>(y) - cy;
      long sx = std::lround(cx + a00 * dx + a01 * dy + tx);
      long sy = std::lround(cy + a10 * dx + a11 * dy + ty);
      if (sx < 0 || sy < 0 || sx >= static_cast<long>(x.w) || sy >= static_cast<long>(x.h))
        continue;
      for (std::size_t ch = 0; ch < x.c; ++ch)
        out.at(y, xx, ch) = x.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), ch);
    }
  }
  return out;
}

inline float luma(const Image& x, std::size_t y, std::size_t xx) {
  if (x.c == 1) return x.at(y, xx, 0);
  return 0.299f * x.at(y, xx, 0) + 0.587f * x.at(y, xx, 1) + 0.114f * x.at(y, xx, 2);
}

/// out = degenerate + factor * (x - degenerate), clamped to [0,1].
inline Image blend(const Image& x, const Image& degenerate, float factor) {
  Image out(x.h, x.w, x.c);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    out.v[i] = clamp01(degenerate.v[i] + factor * (x.v[i] - degenerate.v[i]));
  return out;
}

inline Image equalize_channel_lut(const Image& x) {
  Image out = x;
  for (std::size_t ch = 0; ch < x.c; ++ch) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t y = 0; y < x.h; ++y)
      for (std::size_t xx = 0; xx < x.w; ++xx) hist[to_byte(x.at(y, xx, ch))]++;
    std::array<std::size_t, 256> cdf{};
    std::size_t run = 0;
    for (int i = 0; i < 256; ++i) {
      run += hist[i];
      cdf[i] = run;
    }
    const std::size_t total = run;
    std::size_t cdf_min = 0;
    for (int i = 0; i < 256; ++i)
      if (hist[i]) {
        cdf_min = cdf[i];
        break;
      }
    if (cdf_min == total) continue;  // constant channel, identity
    std::array<int, 256> lut{};
    for (int i = 0; i < 256; ++i) {
      double num = static_cast<double>(cdf[i]) - static_cast<double>(cdf_min);
      double den = static_cast<double>(total) - static_cast<double>(cdf_min);
      lut[i] = static_cast<int>(std::clamp(std::lround(255.0 * num / den), 0l, 255l));
    }
    for (std::size_t y = 0; y < x.h; ++y)
      for (std::size_t xx = 0; xx < x.w; ++xx)
        out.at(y, xx, ch) = from_byte(lut[to_byte(x.at(y, xx, ch))]);
  }
  return out;
}

inline void cutout_square(Image& img, long center_y, long center_x, long side, float fill) {
  long y0 = center_y - side / 2;
  long x0 = center_x - side / 2;
  for (long y = std::max(0l, y0); y < std::min(static_cast<long>(img.h), y0 + side); ++y)
    for (long x = std::max(0l, x0); x < std::min(static_cast<long>(img.w), x0 + side); ++x)
      for (std::size_t ch = 0; ch < img.c; ++ch)
        img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), ch) = fill;
}

}  // namespace detail

/// Applies one operation at magnitude m. Only Cutout consumes the rng
/// (patch center). All outputs are clamped to [0,1]; dimensions preserved.
inline Image apply_op(OpKind kind, const Image& x, double m, RngStream& rng) {
  check_magnitude(m);
  using detail::clamp01;
  switch (kind) {
    case OpKind::kShearX: {
      double f = magnitude_params(kind, m).value;
      return detail::warp_nn(x, 1.0, -f, 0.0, 1.0, 0.0, 0.0);
    }
    case OpKind::kShearY: {
      double f = magnitude_params(kind, m).value;
      return detail::warp_nn(x, 1.0, 0.0, -f, 1.0, 0.0, 0.0);
    }
    case OpKind::kTranslateX: {
      double shift = std::round(magnitude_params(kind, m).value * static_cast<double>(x.w));
      return detail::warp_nn(x, 1.0, 0.0, 0.0, 1.0, -shift, 0.0);
    }
    case OpKind::kTranslateY: {
      double shift = std::round(magnitude_params(kind, m).value * static_cast<double>(x.h));
      return detail::warp_nn(x, 1.0, 0.0, 0.0, 1.0, 0.0, -shift);
    }
    case OpKind::kRotate: {
      double rad = magnitude_params(kind, m).value * 3.14159265358979323846 / 180.0;
      double c = std::cos(rad), s = std::sin(rad);
      // Inverse rotation.
      return detail::warp_nn(x, c, s, -s, c, 0.0, 0.0);
    }
    case OpKind::kAutoContrast: {
      Image out = x;
      for (std::size_t ch = 0; ch < x.c; ++ch) {
        float lo = 1.0f, hi = 0.0f;
        for (std::size_t y = 0; y < x.h; ++y)
          for (std::size_t xx = 0; xx < x.w; ++xx) {
            float v = x.at(y, xx, ch);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
        if (hi > lo)
          for (std::size_t y = 0; y < x.h; ++y)
            for (std::size_t xx = 0; xx < x.w; ++xx)
              out.at(y, xx, ch) = clamp01((x.at(y, xx, ch) - lo) / (hi - lo));
      }
      return out;
    }
    case OpKind::kInvert: {
      Image out = x;
      for (auto& v : out.v) v = detail::from_byte(255 - detail::to_byte(v));
      return out;
    }
    case OpKind::kEqualize:
      return detail::equalize_channel_lut(x);
    case OpKind::kSolarize: {
      // Byte cut at 256*(1-m): m=0 inverts nothing, m=1 inverts everything.
      long cut = std::lround((1.0 - m) * 256.0);
      Image out = x;
      for (auto& v : out.v) {
        int b = detail::to_byte(v);
        if (b >= cut) v = detail::from_byte(255 - b);
      }
      return out;
    }
    case OpKind::kPosterize: {
      int bits = static_cast<int>(magnitude_params(kind, m).value);
      int mask = 0xFF << (8 - bits);
      Image out = x;
      for (auto& v : out.v) v = detail::from_byte(detail::to_byte(v) & mask);
      return out;
    }
    case OpKind::kContrast: {
      float factor = static_cast<float>(magnitude_params(kind, m).value);
      double mean = 0.0;
      for (std::size_t y = 0; y < x.h; ++y)
        for (std::size_t xx = 0; xx < x.w; ++xx) mean += detail::luma(x, y, xx);
      mean /= static_cast<double>(x.h * x.w);
      Image degenerate(x.h, x.w, x.c, static_cast<float>(mean));
      return detail::blend(x, degenerate, factor);
    }
    case OpKind::kColor: {
      if (x.c == 1) return x;  // grayscale: color has no effect
      if (x.c != 3) throw DomainError("Color requires 1 or 3 channels");
      float factor = static_cast<float>(magnitude_params(kind, m).value);
      Image degenerate(x.h, x.w, x.c);
      for (std::size_t y = 0; y < x.h; ++y)
        for (std::size_t xx = 0; xx < x.w; ++xx) {
          float g = detail::luma(x, y, xx);
          for (std::size_t ch = 0; ch < 3; ++ch) degenerate.at(y, xx, ch) = g;
        }
      return detail::blend(x, degenerate, factor);
    }
    case OpKind::kBrightness: {
      float factor = static_cast<float>(magnitude_params(kind, m).value);
      Image degenerate(x.h, x.w, x.c, 0.0f);
      return detail::blend(x, degenerate, factor);
    }
    case OpKind::kSharpness: {
      float factor = static_cast<float>(magnitude_params(kind, m).value);
      // Degenerate image: 3x3 smoothing kernel, border pixels untouched.
      Image degenerate = x;
      static const float kKernel[3][3] = {{1, 1, 1}, {1, 5, 1}, {1, 1, 1}};
      for (std::size_t y = 1; y + 1 < x.h; ++y)
        for (std::size_t xx = 1; xx + 1 < x.w; ++xx)
          for (std::size_t ch = 0; ch < x.c; ++ch) {
            float acc = 0.0f;
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx)
                acc += kKernel[dy + 1][dx + 1] *
                       x.at(y + static_cast<std::size_t>(dy + 1) - 1,
                            xx + static_cast<std::size_t>(dx + 1) - 1, ch);
            degenerate.at(y, xx, ch) = detail::clamp01(acc / 13.0f);
          }
      return detail::blend(x, degenerate, factor);
    }
    case OpKind::kCutout: {
      long side = std::lround(magnitude_params(kind, m).value);
      Image out = x;
      if (side > 0) {
        long cy = static_cast<long>(rng.next_below(x.h));
        long cx = static_cast<long>(rng.next_below(x.w));
        detail::cutout_square(out, cy, cx, side, 0.5f);
      }
      return out;
    }
  }
  throw DomainError("unknown op kind");
}

}  // namespace dna

#endif  // DNA_IMAGE_OPS_HPP_
