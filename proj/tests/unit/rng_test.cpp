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

#include "ivrkit/rng.hpp"

#include <array>
#include <vector>

#include <gtest/gtest.h>

namespace ivrkit {
namespace {

TEST(Rng, SplitMixMatchesReferenceOutput) {
  // First output of the reference splitmix64 generator seeded with 0.
  EXPECT_EQ(Rng::splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, EngineMatchesStandardMersenneTwister) {
  // The standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489u);
  for (int i = 0; i < 9999; ++i) rng.next();
  EXPECT_EQ(rng.next(), 9981545732273789042ULL);
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng parent(42);
  const auto a = parent.split(7).next();
  const auto b = parent.split(7).next();
  EXPECT_EQ(a, b);
  EXPECT_EQ(parent.split(7).seed(), Rng::splitmix64(42 ^ Rng::splitmix64(7)));
  EXPECT_NE(parent.split(7).seed(), parent.split(8).seed());
  EXPECT_EQ(parent.next(), Rng(42).next());
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.uniform_index(17), b.uniform_index(17));
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng rng(3);
  std::array<int, 5> hits{};
  for (int i = 0; i < 5000; ++i) {
    const auto k = rng.uniform_index(5);
    ASSERT_LT(k, 5u);
    ++hits[k];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  EXPECT_THROW(rng.uniform_index(0), std::invalid_argument);
}

TEST(Rng, Uniform01HalfOpen) {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, WeightedIndexSkipsZeroWeights) {
  Rng rng(5);
  const std::vector<double> w{0.0, 3.0, 0.0, 1.0};
  int first = 0;
  for (int i = 0; i < 8000; ++i) {
    const auto k = rng.weighted_index(w);
    ASSERT_TRUE(k == 1 || k == 3);
    first += k == 1;
  }
  EXPECT_NEAR(first / 8000.0, 0.75, 0.02);
}

TEST(Rng, WeightedIndexRejectsBadWeights) {
  Rng rng(5);
  const std::vector<double> zero{0.0, 0.0};
  const std::vector<double> negative{1.0, -1.0};
  EXPECT_THROW(rng.weighted_index(zero), std::invalid_argument);
  EXPECT_THROW(rng.weighted_index(negative), std::invalid_argument);
}

}  // namespace
}  // namespace ivrkit
