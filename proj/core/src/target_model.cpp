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

#include "aeppt/target_model.hpp"

#include <sstream>

#include "aeppt/rng.hpp"
#include "aeppt/util.hpp"

namespace aeppt {

int argmax_lowest(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw DomainError("argmax of an empty vector");
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

Eigen::VectorXd one_hot(int index, int width) {
  if (index < 0 || index >= width) throw DomainError("one-hot index out of range");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(width);
  v[index] = 1.0;
  return v;
}

TargetModel train_target(const DatasetSplit& split,
                         const nn::DenseNetSpec& spec,
                         const nn::TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (spec.output_head != nn::OutputHead::kSoftmax) {
    throw SpecError("the target model requires a softmax head");
  }
  if (split.member.empty()) throw SizeError("split has no member records");
  const int k = spec.output_width();
  std::vector<std::pair<nn::Vec, nn::Vec>> examples;
  examples.reserve(split.member.size());
  for (const auto& rec : split.member) {
    if (rec.label < 0 || rec.label >= k) {
      throw SpecError("record label exceeds the network's output width");
    }
    examples.emplace_back(rec.features, one_hot(rec.label, k));
  }
  nn::DenseNet net =
      nn::DenseNet::init(spec, rng::derive_seed(cfg.seed, "target-init"));
  net = nn::train(std::move(net), examples, nn::LossKind::kCrossEntropy, cfg);
  return TargetModel{std::move(net), cfg};
}

PredictionVector predict(const TargetModel& model,
                         const Eigen::VectorXd& features) {
  return nn::forward(model.net, features);
}

Eigen::MatrixXd predict_batch(const TargetModel& model,
                              const Eigen::MatrixXd& features) {
  return nn::forward_batch(model.net, features);
}

Eigen::MatrixXd predict_records(const TargetModel& model,
                                std::span<const Record> records) {
  if (records.empty()) throw SizeError("no records to predict");
  Eigen::MatrixXd inputs(records.front().features.size(),
                         static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    inputs.col(static_cast<Eigen::Index>(i)) = records[i].features;
  }
  return predict_batch(model, inputs);
}

double model_accuracy(const TargetModel& model,
                      std::span<const Record> records) {
  if (records.empty()) {
    throw DomainError("model_accuracy over an empty record set");
  }
  const Eigen::MatrixXd predictions = predict_records(model, records);
  long correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (argmax_lowest(predictions.col(static_cast<Eigen::Index>(i))) ==
        records[i].label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

void save_target_file(const std::filesystem::path& path,
                      const TargetModel& model,
                      std::span<const std::string> extra_annotations) {
  std::vector<std::string> annotations{"role=target"};
  annotations.insert(annotations.end(), extra_annotations.begin(),
                     extra_annotations.end());
  std::ostringstream out;
  nn::save_checkpoint(out, model.net, annotations);
  util::write_file(path, out.str());
}

TargetModel load_target_file(const std::filesystem::path& path,
                             std::vector<std::string>* annotations) {
  std::vector<std::string> local;
  std::istringstream in(util::read_file(path));
  nn::DenseNet net = nn::load_checkpoint(in, &local);
  bool role_ok = false;
  for (const auto& a : local) {
    if (a == "role=target") role_ok = true;
  }
  if (!role_ok) {
    throw IoError("checkpoint is not a target model: " + path.string());
  }
  if (annotations) *annotations = std::move(local);
  return TargetModel{std::move(net), nn::TrainConfig{}};
}

}  // namespace aeppt
