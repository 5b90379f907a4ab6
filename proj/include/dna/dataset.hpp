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

#ifndef DNA_DATASET_HPP_
#define DNA_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "dna/errors.hpp"
#include "dna/image.hpp"
#include "dna/image_ops.hpp"
#include "dna/rng.hpp"

namespace dna {

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::string split = "train";

  std::size_t size() const { return images.size(); }
  std::size_t num_classes() const { return class_names.size(); }
};

enum class DatasetKind { kCifar, kSvhn, kSynthetic };

inline DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "cifar" || s == "cifar10" || s == "cifar100") return DatasetKind::kCifar;
  if (s == "svhn") return DatasetKind::kSvhn;
  if (s == "synthetic" || s == "synth") return DatasetKind::kSynthetic;
  throw FormatError("unknown dataset kind: " + s);
}

inline std::vector<std::string> cifar10_class_names() {
  return {"airplane", "automobile", "bird", "cat",  "deer",
          "dog",      "frog",       "horse", "ship", "truck"};
}

// ---------------------------------------------------------------------------
// CIFAR binary record format: 1 label byte + h*w*c pixel bytes, planar
// channels. Pixels map to [0,1] as v/255.
// ---------------------------------------------------------------------------

inline void load_cifar_records(const std::string& path, std::size_t h, std::size_t w,
                               std::size_t c, std::size_t num_classes, Dataset* out) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw FormatError("cannot open dataset file: " + path);
  const std::streamsize size = f.tellg();
  const std::size_t record = 1 + h * w * c;
  if (size <= 0 || static_cast<std::size_t>(size) % record != 0)
    throw FormatError(path + ": size " + std::to_string(size) + " not a multiple of record size " +
                      std::to_string(record) + " (bad record at byte offset " +
                      std::to_string(static_cast<std::size_t>(size) % record == 0
                                         ? 0
                                         : (static_cast<std::size_t>(size) / record) * record) +
                      ")");
  f.seekg(0);
  std::vector<unsigned char> buf(record);
  const std::size_t n = static_cast<std::size_t>(size) / record;
  for (std::size_t i = 0; i < n; ++i) {
    if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record)))
      throw FormatError(path + ": truncated record at byte offset " + std::to_string(i * record));
    int label = buf[0];
    if (static_cast<std::size_t>(label) >= num_classes)
      throw FormatError(path + ": label " + std::to_string(label) + " out of range at record " +
                        std::to_string(i));
    Image img(h, w, c);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          img.at(y, x, ch) =
              static_cast<float>(buf[1 + (ch * h + y) * w + x]) / 255.0f;
    out->images.push_back(std::move(img));
    out->labels.push_back(label);
  }
}

inline void save_cifar_records(const std::string& path, const Dataset& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open for write: " + path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Image& img = data.images[i];
    std::vector<unsigned char> buf(1 + img.v.size());
    buf[0] = static_cast<unsigned char>(data.labels[i]);
    for (std::size_t ch = 0; ch < img.c; ++ch)
      for (std::size_t y = 0; y < img.h; ++y)
        for (std::size_t x = 0; x < img.w; ++x)
          buf[1 + (ch * img.h + y) * img.w + x] = static_cast<unsigned char>(
              std::clamp(std::lround(img.at(y, x, ch) * 255.0), 0l, 255l));
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
}

struct TrainTest {
  Dataset train, test;
};

/// Loads a CIFAR-layout directory. Standard CIFAR-10 batch names are used
/// when present; otherwise train.bin/test.bin with the same record layout
/// (the documented path for converted SVHN and serialized synthetic sets).
inline TrainTest load_cifar_dir(const std::string& dir, std::vector<std::string> class_names) {
  namespace fs = std::filesystem;
  TrainTest tt;
  tt.train.class_names = class_names;
  tt.test.class_names = class_names;
  tt.train.split = "train";
  tt.test.split = "test";
  const std::size_t k = class_names.size();
  if (fs::exists(fs::path(dir) / "data_batch_1.bin")) {
    for (int b = 1; b <= 5; ++b)
      load_cifar_records(dir + "/data_batch_" + std::to_string(b) + ".bin", 32, 32, 3, k,
                         &tt.train);
    load_cifar_records(dir + "/test_batch.bin", 32, 32, 3, k, &tt.test);
  } else if (fs::exists(fs::path(dir) / "train.bin")) {
    load_cifar_records(dir + "/train.bin", 32, 32, 3, k, &tt.train);
    load_cifar_records(dir + "/test.bin", 32, 32, 3, k, &tt.test);
  } else {
    throw FormatError("no CIFAR-format batch files under " + dir);
  }
  return tt;
}

inline TrainTest load_cifar10(const std::string& dir) {
  return load_cifar_dir(dir, cifar10_class_names());
}

// ---------------------------------------------------------------------------
// Reduced-set construction: proportional per-class counts (deviation <= 1),
// deterministic given the seed.
// ---------------------------------------------------------------------------

inline Dataset stratified_reduce(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n > data.size()) throw ContractError("stratified_reduce: n exceeds dataset size");
  const std::size_t k = data.num_classes();
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

  // Largest-remainder allocation of n across classes.
  std::vector<std::size_t> take(k, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t cls = 0; cls < k; ++cls) {
    double exact = static_cast<double>(n) * static_cast<double>(by_class[cls].size()) /
                   static_cast<double>(data.size());
    take[cls] = static_cast<std::size_t>(exact);
    assigned += take[cls];
    remainders.push_back({-(exact - std::floor(exact)), cls});
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < n && i < remainders.size(); ++i) {
    std::size_t cls = remainders[i].second;
    if (take[cls] < by_class[cls].size()) {
      ++take[cls];
      ++assigned;
    }
  }

  Dataset out;
  out.class_names = data.class_names;
  out.split = data.split;
  for (std::size_t cls = 0; cls < k; ++cls) {
    auto& idx = by_class[cls];
    RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(RngPurpose::kShuffle), cls);
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_below(i)]);
    for (std::size_t i = 0; i < take[cls]; ++i) {
      out.images.push_back(data.images[idx[i]]);
      out.labels.push_back(data.labels[idx[i]]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline preprocessing (flip + pad-crop for CIFAR, terminal 16x16 Cutout
// for CIFAR and SVHN). The learned policy slots between the geometric part
// and the terminal Cutout; that ordering is a pipeline contract.
// ---------------------------------------------------------------------------

inline Image flip_horizontal(const Image& x) {
  Image out(x.h, x.w, x.c);
  for (std::size_t y = 0; y < x.h; ++y)
    for (std::size_t xx = 0; xx < x.w; ++xx)
      for (std::size_t ch = 0; ch < x.c; ++ch) out.at(y, xx, ch) = x.at(y, x.w - 1 - xx, ch);
  return out;
}

/// Zero-pads by `pad` on all sides then crops back to the original size at
/// offset (oy, ox) in [0, 2*pad]. (pad, pad) is the identity crop.
inline Image pad_crop(const Image& x, std::size_t pad, std::size_t oy, std::size_t ox) {
  Image out(x.h, x.w, x.c, 0.0f);
  for (std::size_t y = 0; y < x.h; ++y) {
    long sy = static_cast<long>(y + oy) - static_cast<long>(pad);
    if (sy < 0 || sy >= static_cast<long>(x.h)) continue;
    for (std::size_t xx = 0; xx < x.w; ++xx) {
      long sx = static_cast<long>(xx + ox) - static_cast<long>(pad);
      if (sx < 0 || sx >= static_cast<long>(x.w)) continue;
      for (std::size_t ch = 0; ch < x.c; ++ch)
        out.at(y, xx, ch) = x.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), ch);
    }
  }
  return out;
}

/// Flip(0.5) + pad-4 random crop for CIFAR; identity for SVHN and synthetic.
inline Image preprocess_geometric(const Image& x, DatasetKind kind, RngStream& rng) {
  if (kind == DatasetKind::kSynthetic) return x;
  if (x.h != 32 || x.w != 32) throw ShapeError("preprocess: expected 32x32 input");
  if (kind == DatasetKind::kSvhn) return x;
  Image cur = rng.next_uniform() < 0.5 ? flip_horizontal(x) : x;
  std::size_t oy = rng.next_below(9);
  std::size_t ox = rng.next_below(9);
  return pad_crop(cur, 4, oy, ox);
}

/// Terminal 16x16 Cutout at a uniform center, clipped at borders, fill 0.5.
inline void cutout16(Image& x, RngStream& rng) {
  long cy = static_cast<long>(rng.next_below(x.h));
  long cx = static_cast<long>(rng.next_below(x.w));
  detail::cutout_square(x, cy, cx, 16, 0.5f);
}

/// The full baseline preprocessing op (without the learned policy, which
/// the pipeline inserts before the terminal Cutout).
inline Image preprocess(const Image& x, DatasetKind kind, RngStream& rng) {
  Image cur = preprocess_geometric(x, kind, rng);
  if (kind != DatasetKind::kSynthetic) cutout16(cur, rng);
  return cur;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark with a planted class-conditional invariance.
// Class 0 ("invariant"): rings and glyphs at uniformly random orientation —
// the generative distribution is rotation-invariant by construction.
// Class 1 ("oriented"): the arrow glyph pointing up with < 10 degrees of
// jitter, so rotations leave its support.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::size_t num_per_class = 1000;
  std::size_t image_size = 16;
  std::size_t channels = 1;
  double noise = 0.04;
  std::uint64_t seed = 0;
};

namespace synth_detail {

inline double seg_dist(double px, double py, double ax, double ay, double bx, double by) {
  double vx = bx - ax, vy = by - ay;
  double wx = px - ax, wy = py - ay;
  double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

inline void draw_arrow(Image& img, double angle, double cx, double cy, double scale,
                       double stroke, float bright) {
  // Up-pointing arrow rotated by `angle`: shaft plus two head strokes.
  double s = std::sin(angle), c = std::cos(angle);
  auto rot = [&](double x, double y, double* ox, double* oy) {
    *ox = cx + c * x - s * y;
    *oy = cy + s * x + c * y;
  };
  double tipx, tipy, basex, basey, h1x, h1y, h2x, h2y;
  rot(0, -scale, &tipx, &tipy);            // tip (up in glyph frame)
  rot(0, scale, &basex, &basey);           // base
  rot(-0.6 * scale, -0.3 * scale, &h1x, &h1y);
  rot(0.6 * scale, -0.3 * scale, &h2x, &h2y);
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x) {
      double px = static_cast<double>(x), py = static_cast<double>(y);
      double d = std::min({seg_dist(px, py, basex, basey, tipx, tipy),
                           seg_dist(px, py, tipx, tipy, h1x, h1y),
                           seg_dist(px, py, tipx, tipy, h2x, h2y)});
      double v = std::clamp(1.0 - (d - stroke), 0.0, 1.0) * bright;
      for (std::size_t ch = 0; ch < img.c; ++ch)
        img.at(y, x, ch) = std::max(img.at(y, x, ch), static_cast<float>(v));
    }
}

inline void draw_ring(Image& img, double cx, double cy, double radius, double thickness,
                      float bright) {
  for (std::size_t y = 0; y < img.h; ++y)
    for (std::size_t x = 0; x < img.w; ++x) {
      double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      double d = std::fabs(std::sqrt(dx * dx + dy * dy) - radius) - thickness;
      double v = std::clamp(1.0 - d, 0.0, 1.0) * bright;
      for (std::size_t ch = 0; ch < img.c; ++ch)
        img.at(y, x, ch) = std::max(img.at(y, x, ch), static_cast<float>(v));
    }
}

}  // namespace synth_detail

inline Dataset gen_synthetic(const SyntheticSpec& spec, const std::string& split = "train") {
  Dataset out;
  out.class_names = {"invariant", "oriented"};
  out.split = split;
  const double s = static_cast<double>(spec.image_size);
  const std::uint64_t split_tag = split == "train" ? 1 : 2;
  for (std::size_t i = 0; i < 2 * spec.num_per_class; ++i) {
    int label = static_cast<int>(i % 2);
    RngStream rng = RngStream::derive(spec.seed, static_cast<std::uint64_t>(RngPurpose::kDataGen),
                                      split_tag, i);
    Image img(spec.image_size, spec.image_size, spec.channels, 0.0f);
    double cx = s / 2.0 + (rng.next_uniform() - 0.5) * 0.15 * s;
    double cy = s / 2.0 + (rng.next_uniform() - 0.5) * 0.15 * s;
    float bright = static_cast<float>(0.75 + 0.25 * rng.next_uniform());
    if (label == 0) {
      if (rng.next_uniform() < 0.5) {
        double radius = (0.22 + 0.12 * rng.next_uniform()) * s;
        synth_detail::draw_ring(img, cx, cy, radius, 0.05 * s, bright);
      } else {
        double angle = rng.next_uniform() * 2.0 * 3.14159265358979323846;
        synth_detail::draw_arrow(img, angle, cx, cy, 0.33 * s, 0.05 * s, bright);
      }
    } else {
      double jitter = (rng.next_uniform() - 0.5) * 2.0 * (10.0 * 3.14159265358979323846 / 180.0);
      synth_detail::draw_arrow(img, jitter, cx, cy, 0.33 * s, 0.05 * s, bright);
    }
    for (auto& v : img.v) {
      double noisy = static_cast<double>(v) + spec.noise * rng.next_normal();
      // Quantize to the byte grid like every real loader does.
      long b = std::clamp(std::lround(std::clamp(noisy, 0.0, 1.0) * 255.0), 0l, 255l);
      v = static_cast<float>(b) / 255.0f;
    }
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace dna

#endif  // DNA_DATASET_HPP_
