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

#include "aeppt/defense.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "aeppt/util.hpp"

namespace aeppt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void DefenseConfig::validate() const {
  if (!(epsilon >= 0.0)) throw SpecError("epsilon must be >= 0");
  if (iterations < 1) throw SpecError("iterations must be >= 1");
}

VectorXd one_hot_argmax(const PredictionVector& prediction) {
  if (prediction.size() == 0) {
    throw DomainError("one_hot_argmax of an empty vector");
  }
  return one_hot(argmax_lowest(prediction), static_cast<int>(prediction.size()));
}

double perturbation_size(const PredictionVector& original,
                         const PredictionVector& adversarial) {
  if (original.size() != adversarial.size()) {
    throw ShapeError("perturbation_size over mismatched lengths");
  }
  return (adversarial - original).lpNorm<1>();
}

namespace {

inline double sign_of(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

// Shared lockstep core: perturbs a block of predictions in parallel columns.
// Each column consumes exactly one draw from its own step source per
// iteration, identical to processing it alone.
std::vector<PerturbationTrace> run_block(
    const MatrixXd& originals, const MembershipInferenceNet& substitute,
    const DefenseConfig& cfg,
    std::span<const std::unique_ptr<rng::Stream>> step_streams,
    bool diagnostics) {
  const Eigen::Index k = originals.rows();
  const Eigen::Index b = originals.cols();

  MatrixXd labels(k, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    labels.col(c) = one_hot_argmax(originals.col(c));
  }
  const VectorXd initial_probs = mim_forward_batch(substitute, originals, labels);
  VectorXd targets(b);
  for (Eigen::Index c = 0; c < b; ++c) {
    targets[c] = initial_probs[c] >= 0.5 ? 1.0 : 0.0;
  }

  std::vector<PerturbationTrace> traces(static_cast<std::size_t>(b));
  for (Eigen::Index c = 0; c < b; ++c) {
    auto& trace = traces[static_cast<std::size_t>(c)];
    trace.original = originals.col(c);
    trace.substitute_decision_initial = targets[c] >= 0.5 ? 1 : 0;
    if (diagnostics) {
      trace.loss_per_iteration.reserve(static_cast<std::size_t>(cfg.iterations));
      trace.iterates.reserve(static_cast<std::size_t>(cfg.iterations));
    }
  }

  MatrixXd iterate = originals;
  VectorXd losses;
  for (int t = 0; t < cfg.iterations; ++t) {
    MatrixXd grads = prediction_gradient_batch(
        substitute, iterate, labels, targets,
        nn::LossKind::kBinaryCrossEntropy, diagnostics ? &losses : nullptr,
        nullptr);
    if (!grads.allFinite()) {
      throw NumericError("non-finite perturbation gradient at iteration " +
                         std::to_string(t));
    }
    for (Eigen::Index c = 0; c < b; ++c) {
      auto& trace = traces[static_cast<std::size_t>(c)];
      if (diagnostics) {
        trace.iterates.emplace_back(iterate.col(c));
        trace.loss_per_iteration.push_back(losses[c]);
      }
      const double step =
          step_streams[static_cast<std::size_t>(c)]->next() * cfg.epsilon;
      for (Eigen::Index r = 0; r < k; ++r) {
        iterate(r, c) += step * sign_of(grads(r, c));
      }
    }
    iterate = iterate.cwiseMax(0.0).cwiseMin(1.0);
  }

  for (Eigen::Index c = 0; c < b; ++c) {
    auto& trace = traces[static_cast<std::size_t>(c)];
    VectorXd result = iterate.col(c);
    if (cfg.renormalize) {
      const double sum = result.sum();
      if (sum > 0.0) result /= sum;
    }
    trace.adversarial = std::move(result);
    trace.l1_size = perturbation_size(trace.original, trace.adversarial);
  }
  return traces;
}

}  // namespace

PerturbationTrace generate_adversarial_prediction(
    const PredictionVector& prediction, const MembershipInferenceNet& substitute,
    const DefenseConfig& cfg, rng::UniformSource& steps, bool diagnostics) {
  cfg.validate();
  if (prediction.size() != substitute.input_classes()) {
    throw ShapeError("prediction width does not match the substitute model");
  }

  const VectorXd label = one_hot_argmax(prediction);
  const double initial_prob = mim_forward(substitute, prediction, label);
  const int target_bit = initial_prob >= 0.5 ? 1 : 0;

  PerturbationTrace trace;
  trace.original = prediction;
  trace.substitute_decision_initial = target_bit;

  VectorXd iterate = prediction;
  for (int t = 0; t < cfg.iterations; ++t) {
    double loss = 0.0;
    VectorXd grad = prediction_gradient(substitute, iterate, label, target_bit,
                                        nn::LossKind::kBinaryCrossEntropy,
                                        diagnostics ? &loss : nullptr, nullptr);
    if (!grad.allFinite()) {
      throw NumericError("non-finite perturbation gradient at iteration " +
                         std::to_string(t));
    }
    if (diagnostics) {
      trace.iterates.push_back(iterate);
      trace.loss_per_iteration.push_back(loss);
    }
    const double step = steps.next() * cfg.epsilon;
    for (Eigen::Index r = 0; r < iterate.size(); ++r) {
      iterate[r] += step * sign_of(grad[r]);
    }
    iterate = iterate.cwiseMax(0.0).cwiseMin(1.0);
  }
  if (cfg.renormalize) {
    const double sum = iterate.sum();
    if (sum > 0.0) iterate /= sum;
  }
  trace.adversarial = std::move(iterate);
  trace.l1_size = perturbation_size(trace.original, trace.adversarial);
  return trace;
}

std::vector<PerturbationTrace> generate_adversarial_batch(
    const MatrixXd& predictions, const MembershipInferenceNet& substitute,
    const DefenseConfig& cfg, std::string_view set_name,
    std::uint64_t first_index, int threads, bool diagnostics) {
  cfg.validate();
  if (predictions.rows() != substitute.input_classes()) {
    throw ShapeError("prediction width does not match the substitute model");
  }
  const std::size_t n = static_cast<std::size_t>(predictions.cols());
  std::vector<PerturbationTrace> traces(n);
  const std::uint64_t set_seed = rng::derive_seed(cfg.seed, set_name);

  util::parallel_chunks(n, kDefenseChunk, threads, [&](std::size_t lo,
                                                       std::size_t hi) {
    std::vector<std::unique_ptr<rng::Stream>> streams;
    streams.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      streams.push_back(std::make_unique<rng::Stream>(
          rng::derive_seed(set_seed, "record", first_index + i)));
    }
    std::vector<PerturbationTrace> block = run_block(
        predictions.middleCols(static_cast<Eigen::Index>(lo),
                               static_cast<Eigen::Index>(hi - lo)),
        substitute, cfg, streams, diagnostics);
    for (std::size_t i = lo; i < hi; ++i) {
      traces[i] = std::move(block[i - lo]);
    }
  });
  return traces;
}

PredictionVector truncation_defense(const PredictionVector& prediction,
                                    int decimals) {
  if (decimals < 1) throw SpecError("decimals must be >= 1");
  const double scale = std::pow(10.0, decimals);
  PredictionVector out(prediction.size());
  for (Eigen::Index i = 0; i < prediction.size(); ++i) {
    out[i] = std::floor(prediction[i] * scale) / scale;
  }
  return out;
}

PerturbationSummary summarize_l1(std::span<const PerturbationTrace> traces) {
  PerturbationSummary s;
  if (traces.empty()) return s;
  s.count = traces.size();
  s.min = traces.front().l1_size;
  s.max = traces.front().l1_size;
  double total = 0.0;
  for (const auto& t : traces) {
    total += t.l1_size;
    s.min = std::min(s.min, t.l1_size);
    s.max = std::max(s.max, t.l1_size);
  }
  s.mean = total / static_cast<double>(traces.size());
  return s;
}

}  // namespace aeppt
