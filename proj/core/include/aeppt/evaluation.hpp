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

#ifndef AEPPT_EVALUATION_HPP
#define AEPPT_EVALUATION_HPP

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aeppt/defense.hpp"
#include "aeppt/mim.hpp"

namespace aeppt {

// Member is the positive class.
struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
  double accuracy() const;
  // Absent when no positive predictions / no positives exist.
  std::optional<double> precision() const;
  std::optional<double> recall() const;
};

// Exact counts; decisions and truth are {0,1} bits of equal nonzero length.
ConfusionCounts confusion(std::span<const int> decisions,
                          std::span<const int> truth);

// Standard empirical CDF: P(w) = #{w_i <= w} / m, a right-continuous
// nondecreasing step function with P(max sample) = 1.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> values);  // nonempty

  double operator()(double w) const;
  std::span<const double> sorted_values() const { return sorted_; }
  // (distinct value, cumulative fraction) pairs; nondecreasing in both
  // coordinates, final fraction exactly 1.
  std::vector<std::pair<double, double>> points() const;

 private:
  std::vector<double> sorted_;
};

struct PerClassMetrics {
  int eval_count = 0;
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct PerturbationStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// One attack/defense configuration's results.
struct AttackReport {
  std::string attack;        // mim0|mim1|mim2|mim3|flip|rounding|adv_training
  std::string defense_mode;  // on|off
  std::string fingerprint;   // canonical config hash
  double epsilon = 0.0;
  int iterations = 0;

  ConfusionCounts counts;
  double inference_accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;

  std::map<int, PerClassMetrics> per_class;
  // CDF over per-class accuracy values (the report file's cdf block);
  // precision/recall CDFs accompany it in the CSV.
  std::vector<std::pair<double, double>> cdf_points;
  std::vector<std::pair<double, double>> cdf_precision;
  std::vector<std::pair<double, double>> cdf_recall;

  std::optional<PerturbationStats> perturbation;
};

// One evaluation row: the (possibly defended) prediction served for a record,
// its true class and membership, and the L1 perturbation size (0 when clean).
struct EvalExample {
  int label = 0;
  int membership = 0;
  PredictionVector prediction;
  double l1 = 0.0;
};

std::vector<EvalExample> make_eval_examples(const TargetModel& target,
                                            std::span<const Record> records,
                                            int membership);

struct ReportMeta {
  std::string attack;
  bool defended = false;
  std::string fingerprint;
  double epsilon = 0.0;
  int iterations = 0;
};

// Runs the inference model over a balanced evaluation set and aggregates
// metrics overall and per class. Rejects unbalanced inputs so the 50% chance
// baseline is exact. Classes with no evaluation records are omitted.
AttackReport evaluate_attack(const MembershipInferenceNet& mim,
                             std::span<const EvalExample> members,
                             std::span<const EvalExample> non_members,
                             const ReportMeta& meta);

// Decisions of a model over prepared examples, in order.
std::vector<int> mim_decisions(const MembershipInferenceNet& mim,
                               std::span<const EvalExample> examples);

// Adversary-side loss curve: mean loss of `mim` against the true membership
// bit at each traced iterate. Requires traces generated with diagnostics;
// returns an empty list when the traces carry no iterates. The result has
// exactly T entries, entry t evaluated at the iterate entering iteration t.
struct TraceContext {
  const PerturbationTrace* trace = nullptr;
  Eigen::VectorXd label_onehot;
  int membership = 0;
};

std::vector<double> capture_loss_curve(const MembershipInferenceNet& mim,
                                       std::span<const TraceContext> traced);

// Report file: structured text with a fixed key order, machine-diffable,
// byte-identical for identical inputs. The CSV carries per-class rows and
// all three CDFs for plotting.
void save_report(std::ostream& out, const AttackReport& report);
AttackReport load_report(std::istream& in);
void save_report_csv(std::ostream& out, const AttackReport& report);

}  // namespace aeppt

#endif  // AEPPT_EVALUATION_HPP
