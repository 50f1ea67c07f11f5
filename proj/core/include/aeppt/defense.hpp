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

#ifndef AEPPT_DEFENSE_HPP
#define AEPPT_DEFENSE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "aeppt/mim.hpp"
#include "aeppt/rng.hpp"

namespace aeppt {

struct DefenseConfig {
  double epsilon = 0.0;  // per-iteration step-size cap
  int iterations = 100;  // T
  std::uint64_t seed = 0;
  // Optional simplex renormalization of the final vector. Off by default:
  // the generation procedure clips to [0,1] and stops, which may break the
  // sum-to-1 property of the original prediction.
  bool renormalize = false;

  void validate() const;  // epsilon >= 0, iterations >= 1
};

// Outcome of perturbing one prediction. The optional diagnostics record the
// iterate at the start of every iteration plus the gradient-source model's
// loss there; loss-curve capture against an adversary model reads `iterates`.
struct PerturbationTrace {
  PredictionVector original;
  PredictionVector adversarial;
  double l1_size = 0.0;
  int substitute_decision_initial = 0;
  std::vector<double> loss_per_iteration;       // diagnostics only
  std::vector<PredictionVector> iterates;       // diagnostics only
};

// One-hot encoding of the argmax; ties go to the lowest index.
Eigen::VectorXd one_hot_argmax(const PredictionVector& prediction);

// Exact L1 distance between two equal-length vectors.
double perturbation_size(const PredictionVector& original,
                         const PredictionVector& adversarial);

// Iterative sign-gradient perturbation of one prediction.
//
// The one-hot label and the flip target are both fixed from the *original*
// prediction: target_bit = 1 iff the substitute scores the original >= 0.5.
// Each of the exactly T iterations takes the sign of the gradient of the
// binary cross-entropy between the substitute's output on the current
// iterate and that fixed target, scales it by a fresh uniform(0,1) draw
// times epsilon, adds it, and clips every component to [0,1]. sign(0) = 0.
PerturbationTrace generate_adversarial_prediction(
    const PredictionVector& prediction, const MembershipInferenceNet& substitute,
    const DefenseConfig& cfg, rng::UniformSource& steps,
    bool diagnostics = false);

// Batched driver used by evaluations. Record i uses the stream seeded by
// derive_seed(derive_seed(cfg.seed, set_name), "record", first_index + i),
// so results depend only on the record's identity, never on batch order or
// the thread count. Records are processed in lockstep chunks of
// kDefenseChunk columns; chunk boundaries are fixed by the record index.
inline constexpr std::size_t kDefenseChunk = 256;

std::vector<PerturbationTrace> generate_adversarial_batch(
    const Eigen::MatrixXd& predictions, const MembershipInferenceNet& substitute,
    const DefenseConfig& cfg, std::string_view set_name,
    std::uint64_t first_index = 0, int threads = 1, bool diagnostics = false);

// Baseline defense: truncates (floors) every confidence score to the given
// number of decimal places.
PredictionVector truncation_defense(const PredictionVector& prediction,
                                    int decimals);

// Summary line for the defense run manifest.
struct PerturbationSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

PerturbationSummary summarize_l1(std::span<const PerturbationTrace> traces);

}  // namespace aeppt

#endif  // AEPPT_DEFENSE_HPP
