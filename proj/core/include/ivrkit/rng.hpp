// Copyright 2026 The ivrkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace ivrkit {

/// Seeded random source with portable distributions.
///
/// std::mt19937_64 output is fixed by the standard, but the std::*_distribution
/// adaptors are not, so draws are derived here directly from the engine to
/// keep seeded runs byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::size_t uniform_index(std::size_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t b = bound;
    const std::uint64_t threshold = (0 - b) % b;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return static_cast<std::size_t>(r % b);
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Index drawn proportionally to non-negative weights (at least one positive).
  std::size_t weighted_index(std::span<const double> weights);

  /// Independent child stream. Splitting rule: child seed =
  /// splitmix64(master_seed ^ splitmix64(stream_id)); the parent is not advanced.
  Rng split(std::uint64_t stream_id) const { return Rng(derive_seed(seed_, stream_id)); }

  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id);
  static std::uint64_t splitmix64(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

inline std::uint64_t Rng::splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t Rng::derive_seed(std::uint64_t master, std::uint64_t stream_id) {
  return splitmix64(master ^ splitmix64(stream_id));
}

inline std::size_t Rng::weighted_index(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("weighted_index: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("weighted_index: no positive weight");
  const double target = uniform01() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace ivrkit
