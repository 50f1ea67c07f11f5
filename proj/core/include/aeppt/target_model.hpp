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

#ifndef AEPPT_TARGET_MODEL_HPP
#define AEPPT_TARGET_MODEL_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aeppt/data.hpp"
#include "aeppt/nn.hpp"

namespace aeppt {

// Confidence vector emitted by the target model. Fresh vectors are softmax
// probabilities summing to 1; defended vectors stay componentwise in [0,1]
// but may no longer sum to 1.
using PredictionVector = Eigen::VectorXd;

// The classifier whose training data the defense protects. Immutable after
// training; concurrent predict calls are safe.
struct TargetModel {
  nn::DenseNet net;  // softmax head, K outputs
  nn::TrainConfig train_meta;
};

// Argmax with ties broken toward the lowest index.
int argmax_lowest(const Eigen::VectorXd& v);

Eigen::VectorXd one_hot(int index, int width);

// Trains on split.member only, cross-entropy loss; deterministic in cfg.seed.
TargetModel train_target(const DatasetSplit& split,
                         const nn::DenseNetSpec& spec,
                         const nn::TrainConfig& cfg);

PredictionVector predict(const TargetModel& model,
                         const Eigen::VectorXd& features);
Eigen::MatrixXd predict_batch(const TargetModel& model,
                              const Eigen::MatrixXd& features);
Eigen::MatrixXd predict_records(const TargetModel& model,
                                std::span<const Record> records);

// Fraction of records with argmax(predict) == label.
double model_accuracy(const TargetModel& model, std::span<const Record> records);

// Checkpoint reuses the dense-network format with a role annotation line.
void save_target_file(const std::filesystem::path& path,
                      const TargetModel& model,
                      std::span<const std::string> extra_annotations = {});
TargetModel load_target_file(const std::filesystem::path& path,
                             std::vector<std::string>* annotations = nullptr);

}  // namespace aeppt

#endif  // AEPPT_TARGET_MODEL_HPP
