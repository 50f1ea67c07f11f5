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

#ifndef AEPPT_NN_HPP
#define AEPPT_NN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aeppt/errors.hpp"

namespace aeppt::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { kTanh, kRelu };
enum class OutputHead { kSoftmax, kSigmoid, kLinear };
enum class LossKind { kCrossEntropy, kBinaryCrossEntropy, kL2 };

const char* to_string(Activation a);
const char* to_string(OutputHead h);
const char* to_string(LossKind k);
Activation parse_activation(std::string_view s);
OutputHead parse_head(std::string_view s);
LossKind parse_loss(std::string_view s);

// Feed-forward architecture. layer_sizes[0] is the input width and the last
// entry the output width; hidden layers use hidden_activation, the final
// layer the output head.
struct DenseNetSpec {
  std::vector<int> layer_sizes;
  Activation hidden_activation = Activation::kTanh;
  OutputHead output_head = OutputHead::kSoftmax;

  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }

  // Throws SpecError: needs >= 2 layer sizes, all >= 1, and a sigmoid head
  // requires a final width of 1.
  void validate() const;

  bool operator==(const DenseNetSpec&) const = default;
};

// Rejects the forbidden pairings: binary cross-entropy needs a sigmoid head,
// cross-entropy needs a softmax head. L2 works with any head.
void validate_loss_head(LossKind loss, OutputHead head);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;  // learning_rate > 0, epochs >= 1, batch_size >= 1
};

// A dense network: per-layer weight matrices (out x in, row-major semantics)
// and bias vectors. Immutable once trained; concurrent read-only use is safe.
struct DenseNet {
  DenseNetSpec spec;
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  // Glorot-uniform initialization: weights uniform in [-a, a] with
  // a = sqrt(6 / (fan_in + fan_out)), biases zero, drawn from the seeded
  // stream layer by layer, row-major within each matrix.
  static DenseNet init(const DenseNetSpec& spec, std::uint64_t seed);

  void validate() const;  // shapes match spec, all parameters finite
};

// Single forward pass. The softmax head subtracts the max before
// exponentiating; its output is a probability vector summing to 1.
Vec forward(const DenseNet& net, const Vec& input);

// Batched forward pass; one example per column.
Mat forward_batch(const DenseNet& net, const Mat& inputs);

// Per-example loss. Cross-entropy expects a one-hot (or probability) target;
// binary cross-entropy a single {0,1} target; l2 is the squared distance.
double loss_value(LossKind loss, const Vec& output, const Vec& target);

struct Gradients {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Vec input;  // dJ/dinput
};

// Analytic backpropagation for a single example. relu'(0) = 0 by convention.
Gradients parameter_gradients(const DenseNet& net, const Vec& input,
                              const Vec& target, LossKind loss);

// Gradient of the loss with respect to the network *input*; exact, not
// numeric. Same length as the input.
Vec input_gradient(const DenseNet& net, const Vec& input, const Vec& target,
                   LossKind loss);

// Plain mini-batch SGD on the mean batch loss. Each epoch shuffles example
// indices with the stream seeded by cfg.seed; result is bit-identical for
// identical (data order, seed, cfg). Throws DivergenceError naming the epoch
// if the epoch loss turns non-finite.
DenseNet train(DenseNet net, std::span<const std::pair<Vec, Vec>> data,
               LossKind loss, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Batched internals, shared with the composite membership inference nets.

struct BatchTrace {
  Mat input;                 // d0 x B
  std::vector<Mat> preacts;  // z per layer
  std::vector<Mat> acts;     // post-activation per layer; back() is the output
};

BatchTrace forward_trace(const DenseNet& net, Mat inputs);

// dJ/dz at the final layer per column, unscaled (callers that average over a
// batch divide by B themselves).
Mat output_delta(const DenseNet& net, LossKind loss, const Mat& outputs,
                 const Mat& targets);

struct BatchGradients {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};

// Backpropagates a final-layer delta. Fills parameter gradients when `grads`
// is non-null and returns dJ/dinput (d0 x B).
Mat backward(const DenseNet& net, const BatchTrace& trace, Mat delta_last,
             BatchGradients* grads);

// Derivative of the activation, elementwise; tanh uses the activation value,
// relu the pre-activation with relu'(0) = 0.
Mat activation_derivative(Activation act, const Mat& preact, const Mat& value);

void sgd_step(DenseNet& net, const BatchGradients& grads, double lr);

double batch_loss_sum(LossKind loss, const Mat& outputs, const Mat& targets);

// ---------------------------------------------------------------------------
// Checkpoint format: versioned structured text, 17-significant-digit decimal
// weights, bit-exact round trip.
//
//   densenet v1
//   layers <n0> <n1> ...
//   activation tanh|relu
//   head softmax|sigmoid|linear
//   annotations <k>
//   <k annotation lines>
//   layer <l> weights   (followed by `out` rows of `in` values)
//   layer <l> biases    (followed by one row of `out` values)
//   end densenet

void save_checkpoint(std::ostream& out, const DenseNet& net,
                     std::span<const std::string> annotations = {});
DenseNet load_checkpoint(std::istream& in,
                         std::vector<std::string>* annotations = nullptr);
void save_checkpoint_file(const std::filesystem::path& path,
                          const DenseNet& net,
                          std::span<const std::string> annotations = {});
DenseNet load_checkpoint_file(const std::filesystem::path& path,
                              std::vector<std::string>* annotations = nullptr);

}  // namespace aeppt::nn

#endif  // AEPPT_NN_HPP
