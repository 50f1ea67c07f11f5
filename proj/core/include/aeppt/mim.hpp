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

#ifndef AEPPT_MIM_HPP
#define AEPPT_MIM_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aeppt/data.hpp"
#include "aeppt/nn.hpp"
#include "aeppt/target_model.hpp"

namespace aeppt {

enum class MimStructure { kComposite, kFlat };

enum class MimVariant { kMim0, kMim1, kMim2, kMim3, kSubstitute };

const char* to_string(MimVariant v);
MimVariant parse_mim_variant(std::string_view s);

// Membership inference model mapping (prediction, one-hot label) to a
// membership probability in (0,1).
//
// composite: prediction -> prediction_net, label -> label_net, the two
// sub-network outputs (passed through the hidden activation) are
// concatenated into connection_net, whose sigmoid head emits the
// probability.
//
// flat: a single network over the concatenated (prediction, one-hot label)
// input of width 2K, stored in connection_net.
struct MembershipInferenceNet {
  MimStructure structure = MimStructure::kComposite;
  std::optional<nn::DenseNet> prediction_net;
  std::optional<nn::DenseNet> label_net;
  nn::DenseNet connection_net;

  int input_classes() const;
  void validate() const;
};

// One training row for a membership inference model: the true label one-hot,
// the target model's prediction, and the membership bit (1 = member).
struct MembershipRecord {
  Eigen::VectorXd label_onehot;
  PredictionVector prediction;
  int membership = 0;
};

// Where an adversary's non-member training data comes from. MIM3 draws its
// non-member side from a shifted synthesis distribution.
enum class NonMemberSource { kSameDistribution, kShiftedDistribution };

// Architecture + loss settings for one inference-model variant. Layer lists
// give the widths after the input layer; input widths derive from the class
// count (K for the sub-networks, 2K for a flat net, concatenated sub-output
// widths for the connection net).
struct MimVariantConfig {
  MimVariant variant = MimVariant::kMim0;
  MimStructure structure = MimStructure::kComposite;
  nn::LossKind loss = nn::LossKind::kBinaryCrossEntropy;
  nn::Activation activation = nn::Activation::kRelu;
  std::vector<int> prediction_layers;  // composite
  std::vector<int> label_layers;       // composite
  std::vector<int> connection_layers;  // composite; final width must be 1
  std::vector<int> flat_layers;        // flat; final width must be 1
  NonMemberSource non_member_source = NonMemberSource::kSameDistribution;

  void validate() const;

  // Published layer sizes per variant. MIM2 shares MIM0's structure with an
  // l2 loss; MIM3 shares MIM0's structure with shifted non-member data.
  static MimVariantConfig defaults(MimVariant v);
};

// Builds (y, f(x), bit) rows from the target's predictions. If the member and
// non-member counts differ, the larger side is subsampled (seeded) so the
// result is balanced. label_onehot always encodes the record's true class.
std::vector<MembershipRecord> build_mim_training_set(
    const TargetModel& target, std::span<const Record> members,
    std::span<const Record> non_members, std::uint64_t seed);

double mim_forward(const MembershipInferenceNet& net,
                   const PredictionVector& prediction,
                   const Eigen::VectorXd& label_onehot);

// One probability per column.
Eigen::VectorXd mim_forward_batch(const MembershipInferenceNet& net,
                                  const Eigen::MatrixXd& predictions,
                                  const Eigen::MatrixXd& labels);

// Decision rule: member iff probability >= 0.5.
int infer_membership(const MembershipInferenceNet& net,
                     const PredictionVector& prediction,
                     const Eigen::VectorXd& label_onehot);

// Joint end-to-end training of all sub-networks on the configured loss.
// Deterministic in cfg.seed. Throws DivergenceError naming the epoch on a
// non-finite loss.
MembershipInferenceNet train_mim(const MimVariantConfig& cfg, int n_classes,
                                 std::span<const MembershipRecord> data,
                                 const nn::TrainConfig& tcfg);

// Gradient of loss(I'(prediction, label), target_bit) with respect to the
// prediction components; the quantity Algorithm-style perturbation steps
// take the sign of. Optionally reports the loss and the probability.
Eigen::VectorXd prediction_gradient(
    const MembershipInferenceNet& net, const PredictionVector& prediction,
    const Eigen::VectorXd& label_onehot, int target_bit,
    nn::LossKind loss = nn::LossKind::kBinaryCrossEntropy,
    double* loss_out = nullptr, double* prob_out = nullptr);

// Batched form: one column per record, target bit per column.
Eigen::MatrixXd prediction_gradient_batch(
    const MembershipInferenceNet& net, const Eigen::MatrixXd& predictions,
    const Eigen::MatrixXd& labels, const Eigen::VectorXd& target_bits,
    nn::LossKind loss = nn::LossKind::kBinaryCrossEntropy,
    Eigen::VectorXd* losses_out = nullptr,
    Eigen::VectorXd* probs_out = nullptr);

// Checkpoint: dense-network checkpoints bundled under one header naming the
// variant (annotation role=mim:<variant>).
void save_mim_file(const std::filesystem::path& path,
                   const MembershipInferenceNet& net, MimVariant variant,
                   std::span<const std::string> extra_annotations = {});
MembershipInferenceNet load_mim_file(
    const std::filesystem::path& path, MimVariant* variant = nullptr,
    std::vector<std::string>* annotations = nullptr);

}  // namespace aeppt

#endif  // AEPPT_MIM_HPP
