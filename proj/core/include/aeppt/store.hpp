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

#ifndef AEPPT_STORE_HPP
#define AEPPT_STORE_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aeppt/evaluation.hpp"

namespace aeppt {

// One record's served predictions: the clean softmax vector and the defended
// (adversarial) vector, with its true class, membership, and L1 distance.
struct DefendedExample {
  int label = 0;
  int membership = 0;
  PredictionVector original;
  PredictionVector defended;
  double l1 = 0.0;
};

// Everything a defended evaluation produced, persisted so that every attack
// (and every adaptive attack) is judged against the same served predictions.
struct PredictionStore {
  std::string fingerprint;
  double epsilon = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::string substitute_hash;

  std::vector<DefendedExample> adv_member;      // adversary's training rows
  std::vector<DefendedExample> adv_non_member;
  std::vector<DefendedExample> eval_member;     // held-out evaluation rows
  std::vector<DefendedExample> eval_non_member;

  std::vector<EvalExample> eval_examples(bool members, bool defended) const;
};

void save_store(std::ostream& out, const PredictionStore& store);
PredictionStore load_store(std::istream& in);
void save_store_file(const std::filesystem::path& path,
                     const PredictionStore& store);
PredictionStore load_store_file(const std::filesystem::path& path);

}  // namespace aeppt

#endif  // AEPPT_STORE_HPP
