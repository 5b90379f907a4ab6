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

#ifndef DNA_RNG_HPP_
#define DNA_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace dna {

// All randomness in the project flows through this stream so that runs are
// bit-reproducible across platforms. splitmix64 core; per-sample streams are
// derived from (seed, epoch, sample, purpose) and are order-independent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ull) {}

  static RngStream derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) {
    std::uint64_t h = seed;
    h = mix(h ^ (a * 0xBF58476D1CE4E5B9ull));
    h = mix(h ^ (b * 0x94D049BB133111EBull));
    h = mix(h ^ (c * 0xD6E8FEB86659FD93ull));
    return RngStream(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  /// Uniform on the open interval (0,1).
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller.
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    std::uint64_t threshold = (0ull - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Purpose tags for derived per-sample streams.
enum class RngPurpose : std::uint64_t {
  kPreprocess = 1,
  kGumbel = 2,
  kBernoulli = 3,
  kCutout = 4,
  kShuffle = 5,
  kInit = 6,
  kDataGen = 7,
  kTerminalCutout = 8,
};

inline RngStream sample_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample,
                               RngPurpose purpose) {
  return RngStream::derive(seed, epoch + 1, sample + 1, static_cast<std::uint64_t>(purpose));
}

}  // namespace dna

#endif  // DNA_RNG_HPP_
