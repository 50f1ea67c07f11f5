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

#include "aeppt/nn.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "aeppt/rng.hpp"
#include "aeppt/util.hpp"

namespace aeppt::nn {

namespace {

// Floor for probabilities inside logarithms; keeps loss values finite when a
// sigmoid/softmax output saturates. Gradients never go through this clamp.
constexpr double kLogFloor = 1e-12;

void check(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

Mat apply_activation(Activation act, const Mat& z) {
  switch (act) {
    case Activation::kTanh:
      return z.array().tanh();
    case Activation::kRelu:
      return z.cwiseMax(0.0);
  }
  throw SpecError("unknown activation");
}

Mat apply_head(OutputHead head, const Mat& z) {
  switch (head) {
    case OutputHead::kLinear:
      return z;
    case OutputHead::kSigmoid:
      return (1.0 + (-z.array()).exp()).inverse();
    case OutputHead::kSoftmax: {
      Mat out(z.rows(), z.cols());
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        // Max subtraction for stability.
        Eigen::ArrayXd shifted = z.col(c).array() - z.col(c).maxCoeff();
        Eigen::ArrayXd e = shifted.exp();
        out.col(c) = e / e.sum();
      }
      return out;
    }
  }
  throw SpecError("unknown output head");
}

}  // namespace

const char* to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

const char* to_string(OutputHead h) {
  switch (h) {
    case OutputHead::kSoftmax:
      return "softmax";
    case OutputHead::kSigmoid:
      return "sigmoid";
    default:
      return "linear";
  }
}

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::kCrossEntropy:
      return "cross_entropy";
    case LossKind::kBinaryCrossEntropy:
      return "binary_cross_entropy";
    default:
      return "l2";
  }
}

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw SpecError("unknown activation: '" + std::string(s) + "'");
}

OutputHead parse_head(std::string_view s) {
  if (s == "softmax") return OutputHead::kSoftmax;
  if (s == "sigmoid") return OutputHead::kSigmoid;
  if (s == "linear") return OutputHead::kLinear;
  throw SpecError("unknown output head: '" + std::string(s) + "'");
}

LossKind parse_loss(std::string_view s) {
  if (s == "cross_entropy") return LossKind::kCrossEntropy;
  if (s == "binary_cross_entropy") return LossKind::kBinaryCrossEntropy;
  if (s == "l2") return LossKind::kL2;
  throw SpecError("unknown loss: '" + std::string(s) + "'");
}

void DenseNetSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw SpecError("layer_sizes needs at least an input and an output width");
  }
  for (int n : layer_sizes) {
    if (n < 1) throw SpecError("layer widths must be >= 1");
  }
  if (output_head == OutputHead::kSigmoid && layer_sizes.back() != 1) {
    throw SpecError("sigmoid head requires a final layer width of 1");
  }
}

void validate_loss_head(LossKind loss, OutputHead head) {
  if (loss == LossKind::kCrossEntropy && head != OutputHead::kSoftmax) {
    throw SpecError("cross_entropy loss requires a softmax head");
  }
  if (loss == LossKind::kBinaryCrossEntropy && head != OutputHead::kSigmoid) {
    throw SpecError("binary_cross_entropy loss requires a sigmoid head");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw SpecError("learning_rate must be > 0");
  if (epochs < 1) throw SpecError("epochs must be >= 1");
  if (batch_size < 1) throw SpecError("batch_size must be >= 1");
}

DenseNet DenseNet::init(const DenseNetSpec& spec, std::uint64_t seed) {
  spec.validate();
  rng::Stream stream(seed);
  DenseNet net;
  net.spec = spec;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_sizes[static_cast<std::size_t>(l)];
    const int out = spec.layer_sizes[static_cast<std::size_t>(l) + 1];
    const double a = std::sqrt(6.0 / (in + out));
    Mat w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) {
        w(r, c) = stream.uniform(-a, a);
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(out));
  }
  return net;
}

void DenseNet::validate() const {
  spec.validate();
  const std::size_t layers = static_cast<std::size_t>(spec.layer_count());
  if (weights.size() != layers || biases.size() != layers) {
    throw ShapeError("parameter count does not match spec");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (weights[l].rows() != spec.layer_sizes[l + 1] ||
        weights[l].cols() != spec.layer_sizes[l] ||
        biases[l].size() != spec.layer_sizes[l + 1]) {
      throw ShapeError("parameter shapes do not match spec");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw NumericError("non-finite network parameters");
    }
  }
}

BatchTrace forward_trace(const DenseNet& net, Mat inputs) {
  check(inputs.rows() == net.spec.input_width(), "input width mismatch");
  BatchTrace trace;
  trace.input = std::move(inputs);
  const int layers = net.spec.layer_count();
  trace.preacts.reserve(static_cast<std::size_t>(layers));
  trace.acts.reserve(static_cast<std::size_t>(layers));
  const Mat* prev = &trace.input;
  for (int l = 0; l < layers; ++l) {
    const std::size_t li = static_cast<std::size_t>(l);
    Mat z = (net.weights[li] * (*prev)).colwise() + net.biases[li];
    Mat a = (l + 1 == layers)
                ? apply_head(net.spec.output_head, z)
                : apply_activation(net.spec.hidden_activation, z);
    trace.preacts.push_back(std::move(z));
    trace.acts.push_back(std::move(a));
    prev = &trace.acts.back();
  }
  return trace;
}

Mat forward_batch(const DenseNet& net, const Mat& inputs) {
  return forward_trace(net, inputs).acts.back();
}

Vec forward(const DenseNet& net, const Vec& input) {
  return forward_batch(net, input);
}

double loss_value(LossKind loss, const Vec& output, const Vec& target) {
  check(output.size() == target.size(), "output/target length mismatch");
  switch (loss) {
    case LossKind::kCrossEntropy:
      return -(target.array() * output.array().max(kLogFloor).log()).sum();
    case LossKind::kBinaryCrossEntropy: {
      check(output.size() == 1, "binary_cross_entropy expects a scalar output");
      const double p = output[0];
      const double t = target[0];
      return -(t * std::log(std::max(p, kLogFloor)) +
               (1.0 - t) * std::log(std::max(1.0 - p, kLogFloor)));
    }
    case LossKind::kL2:
      return (output - target).squaredNorm();
  }
  throw SpecError("unknown loss");
}

double batch_loss_sum(LossKind loss, const Mat& outputs, const Mat& targets) {
  check(outputs.rows() == targets.rows() && outputs.cols() == targets.cols(),
        "output/target shape mismatch");
  switch (loss) {
    case LossKind::kCrossEntropy:
      return -(targets.array() * outputs.array().max(kLogFloor).log()).sum();
    case LossKind::kBinaryCrossEntropy:
      return -(targets.array() * outputs.array().max(kLogFloor).log() +
               (1.0 - targets.array()) *
                   (1.0 - outputs.array()).max(kLogFloor).log())
                  .sum();
    case LossKind::kL2:
      return (outputs - targets).squaredNorm();
  }
  throw SpecError("unknown loss");
}

Mat output_delta(const DenseNet& net, LossKind loss, const Mat& outputs,
                 const Mat& targets) {
  validate_loss_head(loss, net.spec.output_head);
  check(outputs.rows() == targets.rows() && outputs.cols() == targets.cols(),
        "output/target shape mismatch");
  switch (loss) {
    case LossKind::kCrossEntropy:
    case LossKind::kBinaryCrossEntropy:
      // Both collapse to p - t at the final pre-activation.
      return outputs - targets;
    case LossKind::kL2: {
      Mat g = 2.0 * (outputs - targets);  // dJ/d(output)
      switch (net.spec.output_head) {
        case OutputHead::kLinear:
          return g;
        case OutputHead::kSigmoid:
          return g.array() * outputs.array() * (1.0 - outputs.array());
        case OutputHead::kSoftmax: {
          // dJ/dz_i = p_i * (g_i - g.p) per column.
          Mat delta(g.rows(), g.cols());
          for (Eigen::Index c = 0; c < g.cols(); ++c) {
            const double dot = g.col(c).dot(outputs.col(c));
            delta.col(c) =
                outputs.col(c).array() * (g.col(c).array() - dot);
          }
          return delta;
        }
      }
      throw SpecError("unknown output head");
    }
  }
  throw SpecError("unknown loss");
}

Mat activation_derivative(Activation act, const Mat& preact,
                          const Mat& value) {
  switch (act) {
    case Activation::kTanh:
      return 1.0 - value.array().square();
    case Activation::kRelu:
      // relu'(0) = 0: strict comparison.
      return (preact.array() > 0.0).cast<double>();
  }
  throw SpecError("unknown activation");
}

Mat backward(const DenseNet& net, const BatchTrace& trace, Mat delta_last,
             BatchGradients* grads) {
  const int layers = net.spec.layer_count();
  if (grads) {
    grads->weights.assign(static_cast<std::size_t>(layers), Mat());
    grads->biases.assign(static_cast<std::size_t>(layers), Vec());
  }
  Mat delta = std::move(delta_last);
  for (int l = layers - 1; l >= 0; --l) {
    const std::size_t li = static_cast<std::size_t>(l);
    const Mat& below = (l == 0) ? trace.input : trace.acts[li - 1];
    if (grads) {
      grads->weights[li].noalias() = delta * below.transpose();
      grads->biases[li] = delta.rowwise().sum();
    }
    Mat propagated = net.weights[li].transpose() * delta;
    if (l == 0) return propagated;
    delta = propagated.array() *
            activation_derivative(net.spec.hidden_activation,
                                  trace.preacts[li - 1], trace.acts[li - 1])
                .array();
  }
  return delta;  // unreachable for layers >= 1
}

void sgd_step(DenseNet& net, const BatchGradients& grads, double lr) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    net.weights[l].noalias() -= lr * grads.weights[l];
    net.biases[l].noalias() -= lr * grads.biases[l];
  }
}

namespace {

Gradients gradients_impl(const DenseNet& net, const Vec& input,
                         const Vec& target, LossKind loss, bool want_params) {
  net.validate();
  validate_loss_head(loss, net.spec.output_head);
  check(target.size() == net.spec.output_width(),
        "target width does not match the output layer");
  BatchTrace trace = forward_trace(net, input);
  Mat delta = output_delta(net, loss, trace.acts.back(), target);
  Gradients result;
  BatchGradients batch;
  Mat dinput = backward(net, trace, std::move(delta),
                        want_params ? &batch : nullptr);
  result.input = dinput.col(0);
  if (want_params) {
    result.weights = std::move(batch.weights);
    result.biases = std::move(batch.biases);
  }
  return result;
}

}  // namespace

Gradients parameter_gradients(const DenseNet& net, const Vec& input,
                              const Vec& target, LossKind loss) {
  return gradients_impl(net, input, target, loss, true);
}

Vec input_gradient(const DenseNet& net, const Vec& input, const Vec& target,
                   LossKind loss) {
  return gradients_impl(net, input, target, loss, false).input;
}

DenseNet train(DenseNet net, std::span<const std::pair<Vec, Vec>> data,
               LossKind loss, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  validate_loss_head(loss, net.spec.output_head);
  if (data.empty()) throw SizeError("training data is empty");
  const int d_in = net.spec.input_width();
  const int d_out = net.spec.output_width();
  for (const auto& [x, t] : data) {
    check(x.size() == d_in && t.size() == d_out,
          "training example dimensions do not match the network");
  }

  rng::Stream stream(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  Mat x_batch(d_in, static_cast<Eigen::Index>(std::min(bs, n)));
  Mat t_batch(d_out, x_batch.cols());
  BatchGradients grads;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    stream.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t b = std::min(bs, n - start);
      x_batch.resize(d_in, static_cast<Eigen::Index>(b));
      t_batch.resize(d_out, static_cast<Eigen::Index>(b));
      for (std::size_t j = 0; j < b; ++j) {
        const auto& [x, t] = data[order[start + j]];
        x_batch.col(static_cast<Eigen::Index>(j)) = x;
        t_batch.col(static_cast<Eigen::Index>(j)) = t;
      }
      BatchTrace trace = forward_trace(net, x_batch);
      epoch_loss += batch_loss_sum(loss, trace.acts.back(), t_batch);
      Mat delta = output_delta(net, loss, trace.acts.back(), t_batch) /
                  static_cast<double>(b);
      backward(net, trace, std::move(delta), &grads);
      sgd_step(net, grads, cfg.learning_rate);
    }
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("training diverged at epoch " +
                            std::to_string(epoch));
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

std::string next_line(std::istream& in, const char* context) {
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError(std::string("unexpected end of checkpoint while reading ") +
                  context);
  }
  return line;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

void expect(bool ok, const std::string& what) {
  if (!ok) throw IoError("malformed checkpoint: " + what);
}

}  // namespace

void save_checkpoint(std::ostream& out, const DenseNet& net,
                     std::span<const std::string> annotations) {
  net.validate();
  out << "densenet v1\n";
  out << "layers";
  for (int n : net.spec.layer_sizes) out << ' ' << n;
  out << '\n';
  out << "activation " << to_string(net.spec.hidden_activation) << '\n';
  out << "head " << to_string(net.spec.output_head) << '\n';
  out << "annotations " << annotations.size() << '\n';
  for (const auto& a : annotations) out << a << '\n';
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    out << "layer " << l << " weights\n";
    const Mat& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        if (c) out << ' ';
        out << util::format_double(w(r, c));
      }
      out << '\n';
    }
    out << "layer " << l << " biases\n";
    const Vec& b = net.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) {
      if (r) out << ' ';
      out << util::format_double(b[r]);
    }
    out << '\n';
  }
  out << "end densenet\n";
}

DenseNet load_checkpoint(std::istream& in,
                         std::vector<std::string>* annotations) {
  expect(next_line(in, "header") == "densenet v1", "bad header");
  auto layer_tokens = split_ws(next_line(in, "layers"));
  expect(layer_tokens.size() >= 3 && layer_tokens[0] == "layers",
         "bad layers line");
  DenseNetSpec spec;
  for (std::size_t i = 1; i < layer_tokens.size(); ++i) {
    spec.layer_sizes.push_back(
        static_cast<int>(util::parse_int(layer_tokens[i])));
  }
  auto act_tokens = split_ws(next_line(in, "activation"));
  expect(act_tokens.size() == 2 && act_tokens[0] == "activation",
         "bad activation line");
  spec.hidden_activation = parse_activation(act_tokens[1]);
  auto head_tokens = split_ws(next_line(in, "head"));
  expect(head_tokens.size() == 2 && head_tokens[0] == "head", "bad head line");
  spec.output_head = parse_head(head_tokens[1]);
  spec.validate();

  auto ann_tokens = split_ws(next_line(in, "annotations"));
  expect(ann_tokens.size() == 2 && ann_tokens[0] == "annotations",
         "bad annotations line");
  const long long ann_count = util::parse_int(ann_tokens[1]);
  for (long long i = 0; i < ann_count; ++i) {
    std::string a = next_line(in, "annotation");
    if (annotations) annotations->push_back(std::move(a));
  }

  DenseNet net;
  net.spec = spec;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in_w = spec.layer_sizes[static_cast<std::size_t>(l)];
    const int out_w = spec.layer_sizes[static_cast<std::size_t>(l) + 1];
    std::string marker = "layer " + std::to_string(l) + " weights";
    expect(next_line(in, "layer marker") == marker, "expected " + marker);
    Mat w(out_w, in_w);
    for (int r = 0; r < out_w; ++r) {
      auto row = split_ws(next_line(in, "weight row"));
      expect(static_cast<int>(row.size()) == in_w, "weight row width");
      for (int c = 0; c < in_w; ++c) {
        w(r, c) = util::parse_double(row[static_cast<std::size_t>(c)]);
      }
    }
    marker = "layer " + std::to_string(l) + " biases";
    expect(next_line(in, "bias marker") == marker, "expected " + marker);
    auto brow = split_ws(next_line(in, "bias row"));
    expect(static_cast<int>(brow.size()) == out_w, "bias row width");
    Vec b(out_w);
    for (int r = 0; r < out_w; ++r) {
      b[r] = util::parse_double(brow[static_cast<std::size_t>(r)]);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  expect(next_line(in, "trailer") == "end densenet", "bad trailer");
  net.validate();
  return net;
}

void save_checkpoint_file(const std::filesystem::path& path,
                          const DenseNet& net,
                          std::span<const std::string> annotations) {
  std::ostringstream out;
  save_checkpoint(out, net, annotations);
  util::write_file(path, out.str());
}

DenseNet load_checkpoint_file(const std::filesystem::path& path,
                              std::vector<std::string>* annotations) {
  std::istringstream in(util::read_file(path));
  return load_checkpoint(in, annotations);
}

}  // namespace aeppt::nn
