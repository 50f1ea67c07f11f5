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

#include <cmath>
#include <filesystem>

#include "aeppt/mim.hpp"
#include "aeppt/rng.hpp"
#include "doctest.h"

using namespace aeppt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

TargetModel tiny_target(int f, int k, std::uint64_t seed) {
  TargetModel model;
  nn::DenseNetSpec spec{{f, k}, nn::Activation::kTanh,
                        nn::OutputHead::kSoftmax};
  model.net = nn::DenseNet::init(spec, seed);
  return model;
}

std::vector<Record> random_records(int n, int f, int k, std::uint64_t seed) {
  rng::Stream s(seed);
  std::vector<Record> records;
  for (int i = 0; i < n; ++i) {
    VectorXd x(f);
    for (int j = 0; j < f; ++j) x[j] = s.next() < 0.4 ? 1.0 : 0.0;
    records.push_back(
        Record{x, static_cast<int>(s.below(static_cast<std::uint64_t>(k)))});
  }
  return records;
}

}  // namespace

TEST_CASE("build_mim_training_set: balanced row construction") {
  const int f = 6, k = 3;
  const TargetModel target = tiny_target(f, k, 5);
  const auto members = random_records(10, f, k, 7);
  const auto non_members = random_records(10, f, k, 9);

  const auto rows = build_mim_training_set(target, members, non_members, 11);
  REQUIRE(rows.size() == 20);
  int bits = 0;
  for (const auto& r : rows) bits += r.membership;
  CHECK(bits == 10);

  // 10 members vs 4 non-members: equalized to 4 + 4.
  const auto smaller = std::vector<Record>(non_members.begin(),
                                           non_members.begin() + 4);
  const auto equalized = build_mim_training_set(target, members, smaller, 13);
  CHECK(equalized.size() == 8);

  // The one-hot encodes the record's true class, not the predicted one.
  for (std::size_t i = 0; i < members.size(); ++i) {
    CHECK(rows[i].label_onehot[members[i].label] == 1.0);
    CHECK(rows[i].label_onehot.sum() == 1.0);
  }

  CHECK_THROWS_AS(
      build_mim_training_set(target, members, std::vector<Record>{}, 1),
      SizeError);
}

TEST_CASE("mim_forward: hand-built one-unit sub-networks") {
  // Every sub-network is a single linear unit; the oracle is computed with
  // plain doubles. K = 2, relu activations.
  MembershipInferenceNet net;
  net.structure = MimStructure::kComposite;
  nn::DenseNet pred;
  pred.spec = {{2, 1}, nn::Activation::kRelu, nn::OutputHead::kLinear};
  pred.weights = {(MatrixXd(1, 2) << 0.7, -0.3).finished()};
  pred.biases = {VectorXd::Constant(1, 0.1)};
  nn::DenseNet label = pred;
  label.weights = {(MatrixXd(1, 2) << 0.2, 0.5).finished()};
  label.biases = {VectorXd::Constant(1, -0.05)};
  nn::DenseNet conn;
  conn.spec = {{2, 1}, nn::Activation::kRelu, nn::OutputHead::kSigmoid};
  conn.weights = {(MatrixXd(1, 2) << 1.5, -2.0).finished()};
  conn.biases = {VectorXd::Constant(1, 0.25)};
  net.prediction_net = pred;
  net.label_net = label;
  net.connection_net = conn;
  net.validate();

  VectorXd prediction(2), onehot(2);
  prediction << 0.8, 0.2;
  onehot << 0.0, 1.0;

  const double u = std::max(0.0, 0.7 * 0.8 - 0.3 * 0.2 + 0.1);
  const double v = std::max(0.0, 0.2 * 0.0 + 0.5 * 1.0 - 0.05);
  const double z = 1.5 * u - 2.0 * v + 0.25;
  const double expected = 1.0 / (1.0 + std::exp(-z));

  const double got = mim_forward(net, prediction, onehot);
  CHECK(std::abs(got - expected) < 1e-12);
  CHECK(got > 0.0);
  CHECK(got < 1.0);
  CHECK(mim_forward(net, prediction, onehot) == got);  // deterministic
}

TEST_CASE("composite equals an equivalent hand-flattened network") {
  const int k = 3;
  MimVariantConfig cfg = MimVariantConfig::defaults(MimVariant::kSubstitute);
  cfg.prediction_layers = {4};
  cfg.label_layers = {3};
  cfg.connection_layers = {5, 1};
  const std::vector<MembershipRecord> rows = [&] {
    const TargetModel target = tiny_target(6, k, 3);
    const auto members = random_records(12, 6, k, 21);
    const auto non_members = random_records(12, 6, k, 22);
    return build_mim_training_set(target, members, non_members, 23);
  }();
  nn::TrainConfig tcfg{0.05, 3, 4, 77};
  const MembershipInferenceNet composite = train_mim(cfg, k, rows, tcfg);

  // Flatten: first layer is block-diagonal over (prediction, label), the
  // connection layers follow unchanged.
  MembershipInferenceNet flat;
  flat.structure = MimStructure::kFlat;
  nn::DenseNet net;
  net.spec = {{2 * k, 7, 5, 1}, nn::Activation::kRelu,
              nn::OutputHead::kSigmoid};
  MatrixXd w0 = MatrixXd::Zero(7, 2 * k);
  w0.block(0, 0, 4, k) = composite.prediction_net->weights[0];
  w0.block(4, k, 3, k) = composite.label_net->weights[0];
  VectorXd b0(7);
  b0 << composite.prediction_net->biases[0], composite.label_net->biases[0];
  net.weights = {w0, composite.connection_net.weights[0],
                 composite.connection_net.weights[1]};
  net.biases = {b0, composite.connection_net.biases[0],
                composite.connection_net.biases[1]};
  flat.connection_net = net;
  flat.validate();

  rng::Stream s(31);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd prediction(k), onehot = VectorXd::Zero(k);
    double total = 0;
    for (int i = 0; i < k; ++i) {
      prediction[i] = s.next();
      total += prediction[i];
    }
    prediction /= total;
    onehot[static_cast<int>(s.below(k))] = 1.0;
    const double a = mim_forward(composite, prediction, onehot);
    const double b = mim_forward(flat, prediction, onehot);
    CHECK(std::abs(a - b) < 1e-10);
  }
}

TEST_CASE("infer_membership: threshold semantics at exactly 0.5") {
  // Zero weights make the sigmoid emit exactly 0.5.
  MembershipInferenceNet net;
  net.structure = MimStructure::kFlat;
  net.connection_net.spec = {{4, 1}, nn::Activation::kRelu,
                             nn::OutputHead::kSigmoid};
  net.connection_net.weights = {MatrixXd::Zero(1, 4)};
  net.connection_net.biases = {VectorXd::Zero(1)};

  VectorXd prediction(2), onehot(2);
  prediction << 0.6, 0.4;
  onehot << 1.0, 0.0;
  CHECK(mim_forward(net, prediction, onehot) == 0.5);
  CHECK(infer_membership(net, prediction, onehot) == 1);

  // A slightly negative bias drops the probability below 0.5.
  net.connection_net.biases[0][0] = -4e-4;  // sigma ~ 0.4999
  CHECK(mim_forward(net, prediction, onehot) < 0.5);
  CHECK(infer_membership(net, prediction, onehot) == 0);

  // Raising the final bias raises the probability monotonically.
  double previous = 0.0;
  for (double bias = -2.0; bias <= 2.0; bias += 0.25) {
    net.connection_net.biases[0][0] = bias;
    const double p = mim_forward(net, prediction, onehot);
    CHECK(p > previous);
    previous = p;
  }
}

TEST_CASE("train_mim: no signal in shuffled bits means chance accuracy") {
  const int k = 4;
  rng::Stream s(41);
  std::vector<MembershipRecord> rows;
  for (int i = 0; i < 1200; ++i) {
    VectorXd prediction(k);
    double total = 0;
    for (int j = 0; j < k; ++j) {
      prediction[j] = s.next() + 1e-3;
      total += prediction[j];
    }
    prediction /= total;
    rows.push_back(MembershipRecord{one_hot(static_cast<int>(s.below(k)), k),
                                    prediction,
                                    static_cast<int>(s.below(2))});
  }
  MimVariantConfig cfg = MimVariantConfig::defaults(MimVariant::kSubstitute);
  cfg.prediction_layers = {16};
  cfg.label_layers = {16};
  cfg.connection_layers = {8, 1};
  nn::TrainConfig tcfg{0.001, 30, 32, 43};
  const MembershipInferenceNet net =
      train_mim(cfg, k, std::span(rows).first(400), tcfg);

  // Held-out balanced-ish evaluation: bits were random, so accuracy sits at
  // 50% within sampling noise.
  long correct = 0, total = 0;
  for (std::size_t i = 400; i < rows.size(); ++i) {
    const int decision =
        infer_membership(net, rows[i].prediction, rows[i].label_onehot);
    correct += decision == rows[i].membership;
    ++total;
  }
  const double accuracy = static_cast<double>(correct) / total;
  CHECK(accuracy > 0.45);
  CHECK(accuracy < 0.55);
}

TEST_CASE("train_mim: identical seeds give identical checkpoints") {
  const int k = 3;
  const TargetModel target = tiny_target(5, k, 51);
  const auto rows = build_mim_training_set(
      target, random_records(16, 5, k, 53), random_records(16, 5, k, 54), 55);
  MimVariantConfig cfg = MimVariantConfig::defaults(MimVariant::kMim1);
  cfg.flat_layers = {12, 1};
  nn::TrainConfig tcfg{0.01, 5, 8, 57};
  const MembershipInferenceNet a = train_mim(cfg, k, rows, tcfg);
  const MembershipInferenceNet b = train_mim(cfg, k, rows, tcfg);
  CHECK(a.connection_net.weights[0] == b.connection_net.weights[0]);
  CHECK(a.connection_net.weights[1] == b.connection_net.weights[1]);
}

TEST_CASE("variant defaults carry the published structure") {
  const MimVariantConfig sub = MimVariantConfig::defaults(MimVariant::kSubstitute);
  CHECK(sub.prediction_layers == std::vector<int>{256});
  CHECK(sub.label_layers == std::vector<int>{256});
  CHECK(sub.connection_layers == std::vector<int>{64, 1});

  const MimVariantConfig mim0 = MimVariantConfig::defaults(MimVariant::kMim0);
  CHECK(mim0.prediction_layers == std::vector<int>{1024, 512, 64});
  CHECK(mim0.label_layers == std::vector<int>{512, 64});
  CHECK(mim0.connection_layers == std::vector<int>{256, 64, 1});
  CHECK(mim0.loss == nn::LossKind::kBinaryCrossEntropy);

  const MimVariantConfig mim1 = MimVariantConfig::defaults(MimVariant::kMim1);
  CHECK(mim1.structure == MimStructure::kFlat);
  CHECK(mim1.flat_layers == std::vector<int>{1024, 512, 256, 1});

  CHECK(MimVariantConfig::defaults(MimVariant::kMim2).loss ==
        nn::LossKind::kL2);
  CHECK(MimVariantConfig::defaults(MimVariant::kMim3).non_member_source ==
        NonMemberSource::kShiftedDistribution);

  // The loss pairing is an invariant, not a suggestion.
  MimVariantConfig bad = MimVariantConfig::defaults(MimVariant::kMim2);
  bad.loss = nn::LossKind::kBinaryCrossEntropy;
  CHECK_THROWS_AS(bad.validate(), SpecError);
}

TEST_CASE("mim checkpoints round-trip for both structures") {
  const int k = 3;
  const TargetModel target = tiny_target(5, k, 61);
  const auto rows = build_mim_training_set(
      target, random_records(12, 5, k, 63), random_records(12, 5, k, 64), 65);
  MimVariantConfig cfg = MimVariantConfig::defaults(MimVariant::kSubstitute);
  cfg.prediction_layers = {6};
  cfg.label_layers = {6};
  cfg.connection_layers = {4, 1};
  nn::TrainConfig tcfg{0.01, 2, 8, 67};
  const MembershipInferenceNet net = train_mim(cfg, k, rows, tcfg);

  const auto path =
      std::filesystem::temp_directory_path() / "aeppt_test_mim.ckpt";
  save_mim_file(path, net, MimVariant::kSubstitute, {});
  MimVariant variant{};
  std::vector<std::string> annotations;
  const MembershipInferenceNet loaded = load_mim_file(path, &variant, &annotations);
  CHECK(variant == MimVariant::kSubstitute);
  CHECK(loaded.structure == MimStructure::kComposite);
  CHECK(loaded.prediction_net->weights[0] == net.prediction_net->weights[0]);
  CHECK(loaded.connection_net.weights[1] == net.connection_net.weights[1]);
  bool has_role = false;
  for (const auto& a : annotations) {
    if (a == "role=mim:substitute") has_role = true;
  }
  CHECK(has_role);
  std::filesystem::remove(path);
}
