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

#ifndef AEPPT_EXPERIMENT_HPP
#define AEPPT_EXPERIMENT_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aeppt/adaptive.hpp"
#include "aeppt/config.hpp"
#include "aeppt/store.hpp"

namespace aeppt {

enum class SweepAxis { kEpsilon, kClasses, kAdvFraction };

const char* to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view s);

struct SweepRow {
  double axis_value = 0.0;
  double mean_l1 = 0.0;
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
};

// Drives the full experiment lifecycle against one configuration: synthesis,
// training, defended/undefended evaluations, sweeps, and adaptive attacks.
// Every artifact lands under cfg.out_dir, embeds the config fingerprint, and
// is byte-reproducible from the master seed. Loaded artifacts whose
// fingerprint disagrees with the active config are refused.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }

  std::filesystem::path dataset_path() const;
  std::filesystem::path split_path() const;
  std::filesystem::path target_path() const;
  std::filesystem::path mim_path(MimVariant v) const;
  std::filesystem::path store_path() const;
  std::filesystem::path manifest_path() const;
  std::filesystem::path report_path(const std::string& name) const;
  std::filesystem::path sweep_path(SweepAxis axis) const;
  std::filesystem::path loss_curve_path() const;

  // synth: dataset + split files; idempotent given the seed.
  void run_synth();

  // train: role is target | substitute | mim:mim0 .. mim:mim3.
  void run_train(const std::string& role);

  // evaluate: report files for one attack model, defended or not. A defended
  // evaluation (re)creates the shared prediction store when needed.
  AttackReport run_evaluate(MimVariant attack, bool defended);

  // sweep: one row per grid point; writes the CSV table.
  std::vector<SweepRow> run_sweep(SweepAxis axis);

  // adaptive: requires the defended prediction store on disk.
  AttackReport run_adaptive(AdaptiveKind kind, int rounding_decimals = 3);

  // Mean adversary-model loss per generation iteration over a diagnostics
  // sample; writes the loss-curve CSV.
  std::vector<double> run_loss_curve();

  // In-memory accessors (load from disk on first use).
  const std::vector<Record>& dataset();
  const DatasetSplit& split();
  const TargetModel& target();
  const MembershipInferenceNet& mim(MimVariant v);
  const PredictionStore& store();

  // Held-out, balanced evaluation record indices (into split.member /
  // split.non_member).
  std::pair<std::vector<int>, std::vector<int>> eval_indices();

 private:
  void ensure_dataset();
  void ensure_split();
  void ensure_target();
  void ensure_mim(MimVariant v);
  void ensure_store();
  void check_fingerprint(const std::vector<std::string>& annotations,
                         const std::filesystem::path& path) const;

  // Self-contained in-memory pipeline for one sweep grid point (classes and
  // adv_fraction axes retrain models under the modified configuration).
  static SweepRow grid_point_row(const ExperimentConfig& sub,
                                 double axis_value, int threads);

  std::vector<MembershipRecord> adversary_training_rows(MimVariant v);
  PredictionStore build_store();
  void write_manifest(const PredictionStore& s) const;

  ExperimentConfig cfg_;
  std::string fingerprint_;

  std::optional<std::vector<Record>> dataset_;
  std::optional<Eigen::MatrixXd> centroids_;
  std::optional<DatasetSplit> split_;
  std::optional<TargetModel> target_;
  std::map<MimVariant, MembershipInferenceNet> mims_;
  std::optional<PredictionStore> store_;
};

// Writes the sweep CSV table; exposed for tests.
void save_sweep_csv(std::ostream& out, SweepAxis axis,
                    std::string_view fingerprint,
                    std::span<const SweepRow> rows);

}  // namespace aeppt

#endif  // AEPPT_EXPERIMENT_HPP
