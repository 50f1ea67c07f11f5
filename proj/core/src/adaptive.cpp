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

#include "aeppt/adaptive.hpp"

#include <string>

#include "aeppt/rng.hpp"

namespace aeppt {

using Eigen::MatrixXd;

const char* to_string(AdaptiveKind k) {
  switch (k) {
    case AdaptiveKind::kFlip:
      return "flip";
    case AdaptiveKind::kRounding:
      return "rounding";
    default:
      return "adv_training";
  }
}

AdaptiveKind parse_adaptive_kind(std::string_view s) {
  if (s == "flip") return AdaptiveKind::kFlip;
  if (s == "rounding") return AdaptiveKind::kRounding;
  if (s == "adv_training") return AdaptiveKind::kAdversarialTraining;
  throw SpecError("unknown adaptive attack: '" + std::string(s) + "'");
}

std::vector<int> flip_attack(std::span<const int> decisions) {
  if (decisions.empty()) throw SizeError("no decisions to flip");
  std::vector<int> out(decisions.size());
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    out[i] = decisions[i] ? 0 : 1;
  }
  return out;
}

namespace {

std::vector<EvalExample> defended_examples(
    std::span<const DefendedExample> rows, int truncate_decimals = 0) {
  std::vector<EvalExample> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    PredictionVector p = truncate_decimals > 0
                             ? truncation_defense(row.defended, truncate_decimals)
                             : row.defended;
    out.push_back(EvalExample{row.label, row.membership, std::move(p), row.l1});
  }
  return out;
}

std::vector<MembershipRecord> membership_rows(
    std::span<const DefendedExample> rows, int k, bool use_defended,
    int truncate_decimals = 0) {
  std::vector<MembershipRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    PredictionVector p = use_defended ? row.defended : row.original;
    if (truncate_decimals > 0) p = truncation_defense(p, truncate_decimals);
    out.push_back(
        MembershipRecord{one_hot(row.label, k), std::move(p), row.membership});
  }
  return out;
}

int store_classes(const PredictionStore& store) {
  for (const auto* rows :
       {&store.adv_member, &store.adv_non_member, &store.eval_member,
        &store.eval_non_member}) {
    if (!rows->empty()) return static_cast<int>(rows->front().original.size());
  }
  throw SizeError("prediction store is empty");
}

}  // namespace

AttackReport flip_attack_report(const MembershipInferenceNet& mim,
                                const PredictionStore& store,
                                const ReportMeta& meta) {
  const std::vector<EvalExample> members = defended_examples(store.eval_member);
  const std::vector<EvalExample> non_members =
      defended_examples(store.eval_non_member);
  if (members.size() != non_members.size()) {
    throw SizeError("evaluation sets must be balanced");
  }
  std::vector<EvalExample> all(members.begin(), members.end());
  all.insert(all.end(), non_members.begin(), non_members.end());

  std::vector<int> truth(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) truth[i] = all[i].membership;
  const std::vector<int> flipped = flip_attack(mim_decisions(mim, all));

  AttackReport report;
  report.attack = meta.attack;
  report.defense_mode = "on";
  report.fingerprint = meta.fingerprint;
  report.epsilon = meta.epsilon;
  report.iterations = meta.iterations;
  report.counts = confusion(flipped, truth);
  report.inference_accuracy = report.counts.accuracy();
  report.precision = report.counts.precision();
  report.recall = report.counts.recall();
  PerturbationStats stats;
  stats.min = all.front().l1;
  stats.max = all.front().l1;
  double total = 0.0;
  for (const auto& e : all) {
    total += e.l1;
    stats.min = std::min(stats.min, e.l1);
    stats.max = std::max(stats.max, e.l1);
  }
  stats.mean = total / static_cast<double>(all.size());
  report.perturbation = stats;
  return report;
}

AttackReport rounding_attack(const PredictionStore& store, int decimals,
                             const MimVariantConfig& mim_cfg, int n_classes,
                             const nn::TrainConfig& tcfg,
                             const ReportMeta& meta) {
  if (decimals < 1) throw SpecError("rounding decimals must be >= 1");
  const int k = store_classes(store);
  if (k != n_classes) throw ShapeError("store class count mismatch");

  // The attacker observes only defended outputs; training rows are the
  // truncated defended predictions of its own data.
  std::vector<MembershipRecord> training =
      membership_rows(store.adv_member, k, /*use_defended=*/true, decimals);
  std::vector<MembershipRecord> non_member_rows =
      membership_rows(store.adv_non_member, k, /*use_defended=*/true, decimals);
  training.insert(training.end(), non_member_rows.begin(),
                  non_member_rows.end());

  const MembershipInferenceNet retrained =
      train_mim(mim_cfg, n_classes, training, tcfg);

  const std::vector<EvalExample> members =
      defended_examples(store.eval_member, decimals);
  const std::vector<EvalExample> non_members =
      defended_examples(store.eval_non_member, decimals);
  return evaluate_attack(retrained, members, non_members, meta);
}

AttackReport adversarial_training_attack(
    const PredictionStore& store, const MembershipInferenceNet& attacker_mim,
    const MimVariantConfig& mim_cfg, int n_classes,
    const nn::TrainConfig& tcfg, const DefenseConfig& attacker_defense,
    const ReportMeta& meta, int threads) {
  const int k = store_classes(store);
  if (k != n_classes) throw ShapeError("store class count mismatch");

  // Clean rows: the attacker's own training data before the defense.
  std::vector<MembershipRecord> clean =
      membership_rows(store.adv_member, k, /*use_defended=*/false);
  std::vector<MembershipRecord> clean_non =
      membership_rows(store.adv_non_member, k, /*use_defended=*/false);
  clean.insert(clean.end(), clean_non.begin(), clean_non.end());

  // Perturbed rows: the attacker's own run of the generation algorithm with
  // its own model as the gradient source, keeping the true membership bits.
  MatrixXd predictions(k, static_cast<Eigen::Index>(clean.size()));
  for (std::size_t i = 0; i < clean.size(); ++i) {
    predictions.col(static_cast<Eigen::Index>(i)) = clean[i].prediction;
  }
  const std::vector<PerturbationTrace> traces = generate_adversarial_batch(
      predictions, attacker_mim, attacker_defense, "attacker-advtrain", 0,
      threads);

  std::vector<MembershipRecord> mixture = clean;  // 50/50 clean + perturbed
  mixture.reserve(2 * clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    mixture.push_back(MembershipRecord{clean[i].label_onehot,
                                       traces[i].adversarial,
                                       clean[i].membership});
  }

  const MembershipInferenceNet robust =
      train_mim(mim_cfg, n_classes, mixture, tcfg);

  const std::vector<EvalExample> members = defended_examples(store.eval_member);
  const std::vector<EvalExample> non_members =
      defended_examples(store.eval_non_member);
  return evaluate_attack(robust, members, non_members, meta);
}

}  // namespace aeppt
