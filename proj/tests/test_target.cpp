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

#include <filesystem>

#include "aeppt/target_model.hpp"
#include "doctest.h"

using namespace aeppt;
using Eigen::VectorXd;

namespace {

// A hand-built two-class model that copies its two features into logits.
TargetModel axis_model() {
  TargetModel model;
  model.net.spec = {{2, 2}, nn::Activation::kTanh, nn::OutputHead::kSoftmax};
  model.net.weights = {10.0 * Eigen::MatrixXd::Identity(2, 2)};
  model.net.biases = {VectorXd::Zero(2)};
  return model;
}

std::vector<Record> axis_records() {
  std::vector<Record> records;
  for (int i = 0; i < 10; ++i) {
    VectorXd a(2), b(2);
    a << 1.0, 0.0;
    b << 0.0, 1.0;
    records.push_back(Record{a, 0});
    records.push_back(Record{b, 1});
  }
  return records;
}

}  // namespace

TEST_CASE("argmax tie-breaking picks the lowest index") {
  VectorXd tie(2);
  tie << 0.5, 0.5;
  CHECK(argmax_lowest(tie) == 0);
  VectorXd uniform = VectorXd::Constant(7, 1.0 / 7.0);
  CHECK(argmax_lowest(uniform) == 0);
  VectorXd v(3);
  v << 0.1, 0.7, 0.2;
  CHECK(argmax_lowest(v) == 1);
}

TEST_CASE("predict: probability vector, pure function") {
  const TargetModel model = axis_model();
  VectorXd x(2);
  x << 0.3, 0.4;
  const PredictionVector p = predict(model, x);
  CHECK(std::abs(p.sum() - 1.0) < 1e-9);
  CHECK(p.minCoeff() >= 0.0);
  CHECK(predict(model, x) == p);
}

TEST_CASE("model_accuracy equals a brute-force recount") {
  const TargetModel model = axis_model();
  const std::vector<Record> records = axis_records();
  CHECK(model_accuracy(model, records) == 1.0);

  // Permute labels: every record is now misclassified.
  std::vector<Record> permuted = records;
  for (auto& r : permuted) r.label = 1 - r.label;
  CHECK(model_accuracy(model, permuted) == 0.0);

  // Independent recount over a mixed fixture.
  std::vector<Record> mixed = records;
  mixed[3].label = 1 - mixed[3].label;
  mixed[8].label = 1 - mixed[8].label;
  long correct = 0;
  for (const auto& r : mixed) {
    const PredictionVector p = predict(model, r.features);
    int best = 0;
    for (int i = 1; i < 2; ++i) {
      if (p[i] > p[best]) best = i;
    }
    if (best == r.label) ++correct;
  }
  CHECK(model_accuracy(model, mixed) ==
        static_cast<double>(correct) / static_cast<double>(mixed.size()));

  CHECK_THROWS_AS(model_accuracy(model, std::vector<Record>{}), DomainError);
}

TEST_CASE("train_target: memorizes an easy two-class problem") {
  SynthesisConfig cfg{240, 24, 2, 2, 0.02, 7};
  const auto vectors = synthesize(cfg);
  const auto records = cluster_labels(vectors, 2, 9);
  const DatasetSplit split = make_splits(records, 120, 120, 0.5, 11);

  nn::DenseNetSpec spec{{24, 16, 2}, nn::Activation::kTanh,
                        nn::OutputHead::kSoftmax};
  nn::TrainConfig tcfg{0.1, 60, 16, 13};
  const TargetModel model = train_target(split, spec, tcfg);
  CHECK(model_accuracy(model, split.member) >= 0.98);
  CHECK(model_accuracy(model, split.non_member) >= 0.98);

  // Identical seeds give identical checkpoints.
  const TargetModel again = train_target(split, spec, tcfg);
  for (std::size_t l = 0; l < model.net.weights.size(); ++l) {
    CHECK(model.net.weights[l] == again.net.weights[l]);
  }
}

TEST_CASE("target checkpoint carries the role annotation") {
  const TargetModel model = axis_model();
  const auto path =
      std::filesystem::temp_directory_path() / "aeppt_test_target.ckpt";
  save_target_file(path, model, {});
  std::vector<std::string> annotations;
  const TargetModel loaded = load_target_file(path, &annotations);
  CHECK(loaded.net.weights[0] == model.net.weights[0]);
  bool has_role = false;
  for (const auto& a : annotations) {
    if (a == "role=target") has_role = true;
  }
  CHECK(has_role);
  std::filesystem::remove(path);
}
