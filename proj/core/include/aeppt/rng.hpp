// Copyright 2026 The AEPPT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AEPPT_RNG_HPP
#define AEPPT_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace aeppt::rng {

// 64-bit FNV-1a over a byte string. Also used for artifact fingerprints.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t h = 0xcbf29ce484222325ull);

// splitmix64 finalizer; decorrelates structured seed material.
std::uint64_t mix(std::uint64_t x);

// Hierarchical seed derivation: every component of the pipeline draws its
// seed as derive_seed(master, "component-name", index). Distinct
// (component, index) pairs give independent streams, so batch order and
// parallelism cannot change results.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);

// Source of uniform draws in [0,1). Algorithms that consume randomness take
// this interface so tests can stub the sequence.
class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual double next() = 0;
};

// Deterministic stream backed by std::mt19937_64 (fully specified by the
// standard). Doubles use the top 53 bits, so sequences are identical across
// platforms and standard libraries.
class Stream final : public UniformSource {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double next() override {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }

  // Unbiased integer in [0, n) via rejection sampling; n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates shuffle. std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Fixed-value source for tests.
class ConstantSource final : public UniformSource {
 public:
  explicit ConstantSource(double v) : v_(v) {}
  double next() override { return v_; }

 private:
  double v_;
};

}  // namespace aeppt::rng

#endif  // AEPPT_RNG_HPP
