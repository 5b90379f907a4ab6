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

#ifndef DNA_IMAGE_HPP_
#define DNA_IMAGE_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dna/errors.hpp"

namespace dna {

/// H x W x C image with values in [0,1], row-major (y, x, channel).
struct Image {
  std::size_t h = 0, w = 0, c = 0;
  std::vector<float> v;

  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f)
      : h(height), w(width), c(channels), v(height * width * channels, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t ch) { return v[(y * w + x) * c + ch]; }
  float at(std::size_t y, std::size_t x, std::size_t ch) const { return v[(y * w + x) * c + ch]; }

  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

// Flat binary image format used by the golden-image test corpus:
// u32 height, u32 width, u32 channels (little endian), then f32 values.

inline void write_image(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open for write: " + path);
  std::uint32_t dims[3] = {static_cast<std::uint32_t>(img.h), static_cast<std::uint32_t>(img.w),
                           static_cast<std::uint32_t>(img.c)};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  f.write(reinterpret_cast<const char*>(img.v.data()),
          static_cast<std::streamsize>(img.v.size() * sizeof(float)));
}

inline Image read_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open: " + path);
  std::uint32_t dims[3];
  if (!f.read(reinterpret_cast<char*>(dims), sizeof(dims)))
    throw FormatError("truncated image header: " + path);
  Image img(dims[0], dims[1], dims[2]);
  if (!f.read(reinterpret_cast<char*>(img.v.data()),
              static_cast<std::streamsize>(img.v.size() * sizeof(float))))
    throw FormatError("truncated image payload: " + path);
  return img;
}

}  // namespace dna

#endif  // DNA_IMAGE_HPP_
