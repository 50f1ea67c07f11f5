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

#ifndef AEPPT_ADAPTIVE_HPP
#define AEPPT_ADAPTIVE_HPP

#include <span>
#include <string_view>
#include <vector>

#include "aeppt/store.hpp"

namespace aeppt {

enum class AdaptiveKind { kFlip, kRounding, kAdversarialTraining };

const char* to_string(AdaptiveKind k);
AdaptiveKind parse_adaptive_kind(std::string_view s);

struct AdaptiveAttackConfig {
  AdaptiveKind kind = AdaptiveKind::kFlip;
  int rounding_decimals = 3;      // only used when kind == kRounding
  DefenseConfig defense;          // the attacker's own copy of the generator
};

// Inverts every decision bit. An involution: flip(flip(d)) == d, and flipped
// accuracy is exactly 1 - original accuracy on the same decision set.
std::vector<int> flip_attack(std::span<const int> decisions);

// The flip adversary runs the plain model over the defended predictions and
// inverts its decisions.
AttackReport flip_attack_report(const MembershipInferenceNet& mim,
                                const PredictionStore& store,
                                const ReportMeta& meta);

// The rounding adversary truncates every served (defended) confidence score
// to `decimals` places, retrains a fresh inference model on the truncated
// training rows, and is evaluated on truncated defended evaluation rows.
AttackReport rounding_attack(const PredictionStore& store, int decimals,
                             const MimVariantConfig& mim_cfg, int n_classes,
                             const nn::TrainConfig& tcfg,
                             const ReportMeta& meta);

// The adversarial-training adversary perturbs its own clean training rows
// with its copy of the generation algorithm (gradient source: its own
// trained model), retrains on a 50/50 mixture of clean and perturbed rows
// with the true membership bits, and is evaluated against the defender's
// defended evaluation rows.
AttackReport adversarial_training_attack(
    const PredictionStore& store, const MembershipInferenceNet& attacker_mim,
    const MimVariantConfig& mim_cfg, int n_classes,
    const nn::TrainConfig& tcfg, const DefenseConfig& attacker_defense,
    const ReportMeta& meta, int threads = 1);

}  // namespace aeppt

#endif  // AEPPT_ADAPTIVE_HPP
