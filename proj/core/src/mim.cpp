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

#include "aeppt/mim.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "aeppt/rng.hpp"
#include "aeppt/util.hpp"

namespace aeppt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(MimVariant v) {
  switch (v) {
    case MimVariant::kMim0:
      return "mim0";
    case MimVariant::kMim1:
      return "mim1";
    case MimVariant::kMim2:
      return "mim2";
    case MimVariant::kMim3:
      return "mim3";
    default:
      return "substitute";
  }
}

MimVariant parse_mim_variant(std::string_view s) {
  if (s == "mim0") return MimVariant::kMim0;
  if (s == "mim1") return MimVariant::kMim1;
  if (s == "mim2") return MimVariant::kMim2;
  if (s == "mim3") return MimVariant::kMim3;
  if (s == "substitute") return MimVariant::kSubstitute;
  throw SpecError("unknown inference model variant: '" + std::string(s) + "'");
}

int MembershipInferenceNet::input_classes() const {
  if (structure == MimStructure::kComposite) {
    return prediction_net->spec.input_width();
  }
  return connection_net.spec.input_width() / 2;
}

void MembershipInferenceNet::validate() const {
  connection_net.validate();
  if (connection_net.spec.output_head != nn::OutputHead::kSigmoid ||
      connection_net.spec.output_width() != 1) {
    throw SpecError("the final network needs a width-1 sigmoid head");
  }
  if (structure == MimStructure::kComposite) {
    if (!prediction_net || !label_net) {
      throw SpecError("composite model requires prediction and label nets");
    }
    prediction_net->validate();
    label_net->validate();
    if (prediction_net->spec.input_width() != label_net->spec.input_width()) {
      throw SpecError("prediction and label nets must share the class count");
    }
    if (connection_net.spec.input_width() !=
        prediction_net->spec.output_width() +
            label_net->spec.output_width()) {
      throw SpecError(
          "connection net input must equal the concatenated sub-outputs");
    }
  } else {
    if (prediction_net || label_net) {
      throw SpecError("flat model carries a single network");
    }
    if (connection_net.spec.input_width() % 2 != 0) {
      throw SpecError("flat model input width must be 2K");
    }
  }
}

void MimVariantConfig::validate() const {
  if (structure == MimStructure::kComposite) {
    if (prediction_layers.empty() || label_layers.empty() ||
        connection_layers.empty()) {
      throw SpecError("composite variant needs all three layer lists");
    }
    if (connection_layers.back() != 1) {
      throw SpecError("connection net must end in a width-1 layer");
    }
  } else {
    if (flat_layers.empty() || flat_layers.back() != 1) {
      throw SpecError("flat variant needs layers ending in width 1");
    }
  }
  if (variant == MimVariant::kMim2) {
    if (loss != nn::LossKind::kL2) {
      throw SpecError("mim2 uses the l2 loss");
    }
  } else if (loss != nn::LossKind::kBinaryCrossEntropy) {
    throw SpecError("this variant uses binary cross-entropy");
  }
}

MimVariantConfig MimVariantConfig::defaults(MimVariant v) {
  MimVariantConfig cfg;
  cfg.variant = v;
  switch (v) {
    case MimVariant::kSubstitute:
      cfg.prediction_layers = {256};
      cfg.label_layers = {256};
      cfg.connection_layers = {64, 1};
      break;
    case MimVariant::kMim1:
      cfg.structure = MimStructure::kFlat;
      cfg.flat_layers = {1024, 512, 256, 1};
      break;
    case MimVariant::kMim2:
      cfg.loss = nn::LossKind::kL2;
      [[fallthrough]];
    case MimVariant::kMim0:
    case MimVariant::kMim3:
      cfg.prediction_layers = {1024, 512, 64};
      cfg.label_layers = {512, 64};
      cfg.connection_layers = {256, 64, 1};
      break;
  }
  if (v == MimVariant::kMim3) {
    cfg.non_member_source = NonMemberSource::kShiftedDistribution;
  }
  return cfg;
}

namespace {

std::vector<int> with_input(int input, const std::vector<int>& rest) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), rest.begin(), rest.end());
  return sizes;
}

struct CompositeTrace {
  nn::BatchTrace prediction;
  nn::BatchTrace label;
  MatrixXd pred_out;  // activated sub-network outputs
  MatrixXd label_out;
  nn::BatchTrace connection;
};

CompositeTrace composite_forward(const MembershipInferenceNet& net,
                                 const MatrixXd& predictions,
                                 const MatrixXd& labels) {
  CompositeTrace t;
  t.prediction = nn::forward_trace(*net.prediction_net, predictions);
  t.label = nn::forward_trace(*net.label_net, labels);
  // The sub-networks end in a linear head; the composite applies the hidden
  // activation to their outputs before concatenation.
  const nn::Activation act = net.prediction_net->spec.hidden_activation;
  t.pred_out = act == nn::Activation::kTanh
                   ? MatrixXd(t.prediction.acts.back().array().tanh())
                   : MatrixXd(t.prediction.acts.back().cwiseMax(0.0));
  const nn::Activation lact = net.label_net->spec.hidden_activation;
  t.label_out = lact == nn::Activation::kTanh
                    ? MatrixXd(t.label.acts.back().array().tanh())
                    : MatrixXd(t.label.acts.back().cwiseMax(0.0));
  MatrixXd concat(t.pred_out.rows() + t.label_out.rows(),
                  t.pred_out.cols());
  concat.topRows(t.pred_out.rows()) = t.pred_out;
  concat.bottomRows(t.label_out.rows()) = t.label_out;
  t.connection = nn::forward_trace(net.connection_net, std::move(concat));
  return t;
}

void check_widths(const MembershipInferenceNet& net,
                  const MatrixXd& predictions, const MatrixXd& labels) {
  const int k = net.input_classes();
  if (predictions.rows() != k || labels.rows() != k ||
      predictions.cols() != labels.cols()) {
    throw ShapeError("prediction/label widths do not match the model");
  }
}

MatrixXd flat_input(const MatrixXd& predictions, const MatrixXd& labels) {
  MatrixXd input(predictions.rows() + labels.rows(), predictions.cols());
  input.topRows(predictions.rows()) = predictions;
  input.bottomRows(labels.rows()) = labels;
  return input;
}

}  // namespace

VectorXd mim_forward_batch(const MembershipInferenceNet& net,
                           const MatrixXd& predictions,
                           const MatrixXd& labels) {
  check_widths(net, predictions, labels);
  if (net.structure == MimStructure::kFlat) {
    return nn::forward_batch(net.connection_net, flat_input(predictions, labels))
        .row(0);
  }
  CompositeTrace t = composite_forward(net, predictions, labels);
  return t.connection.acts.back().row(0);
}

double mim_forward(const MembershipInferenceNet& net,
                   const PredictionVector& prediction,
                   const VectorXd& label_onehot) {
  return mim_forward_batch(net, prediction, label_onehot)[0];
}

int infer_membership(const MembershipInferenceNet& net,
                     const PredictionVector& prediction,
                     const VectorXd& label_onehot) {
  return mim_forward(net, prediction, label_onehot) >= 0.5 ? 1 : 0;
}

std::vector<MembershipRecord> build_mim_training_set(
    const TargetModel& target, std::span<const Record> members,
    std::span<const Record> non_members, std::uint64_t seed) {
  if (members.empty() || non_members.empty()) {
    throw SizeError("membership training set needs members and non-members");
  }
  const int k = target.net.spec.output_width();

  // Equal member/non-member counts; the larger side is subsampled.
  rng::Stream stream(seed);
  auto pick = [&stream](std::size_t have, std::size_t want) {
    std::vector<int> idx(have);
    std::iota(idx.begin(), idx.end(), 0);
    if (want < have) {
      stream.shuffle(idx);
      idx.resize(want);
      std::sort(idx.begin(), idx.end());
    }
    return idx;
  };
  const std::size_t n = std::min(members.size(), non_members.size());
  const std::vector<int> member_idx = pick(members.size(), n);
  const std::vector<int> non_member_idx = pick(non_members.size(), n);

  std::vector<MembershipRecord> out;
  out.reserve(2 * n);
  auto append = [&](std::span<const Record> records,
                    std::span<const int> idx, int bit) {
    std::vector<Record> chosen;
    chosen.reserve(idx.size());
    for (int i : idx) chosen.push_back(records[static_cast<std::size_t>(i)]);
    const MatrixXd preds = predict_records(target, chosen);
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      out.push_back(MembershipRecord{
          one_hot(chosen[i].label, k),
          preds.col(static_cast<Eigen::Index>(i)), bit});
    }
  };
  append(members, member_idx, 1);
  append(non_members, non_member_idx, 0);
  return out;
}

MembershipInferenceNet train_mim(const MimVariantConfig& cfg, int n_classes,
                                 std::span<const MembershipRecord> data,
                                 const nn::TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (data.empty()) throw SizeError("inference model training data is empty");
  for (const auto& rec : data) {
    if (rec.prediction.size() != n_classes ||
        rec.label_onehot.size() != n_classes) {
      throw ShapeError("membership record width does not match the class count");
    }
  }

  MembershipInferenceNet net;
  net.structure = cfg.structure;
  if (cfg.structure == MimStructure::kComposite) {
    nn::DenseNetSpec pred_spec{with_input(n_classes, cfg.prediction_layers),
                               cfg.activation, nn::OutputHead::kLinear};
    nn::DenseNetSpec label_spec{with_input(n_classes, cfg.label_layers),
                                cfg.activation, nn::OutputHead::kLinear};
    nn::DenseNetSpec conn_spec{
        with_input(pred_spec.output_width() + label_spec.output_width(),
                   cfg.connection_layers),
        cfg.activation, nn::OutputHead::kSigmoid};
    net.prediction_net =
        nn::DenseNet::init(pred_spec, rng::derive_seed(tcfg.seed, "init", 0));
    net.label_net =
        nn::DenseNet::init(label_spec, rng::derive_seed(tcfg.seed, "init", 1));
    net.connection_net =
        nn::DenseNet::init(conn_spec, rng::derive_seed(tcfg.seed, "init", 2));
  } else {
    nn::DenseNetSpec flat_spec{with_input(2 * n_classes, cfg.flat_layers),
                               cfg.activation, nn::OutputHead::kSigmoid};
    net.connection_net =
        nn::DenseNet::init(flat_spec, rng::derive_seed(tcfg.seed, "init", 2));
  }
  net.validate();

  rng::Stream order_stream(rng::derive_seed(tcfg.seed, "order"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(tcfg.batch_size);
  const nn::Activation act = cfg.activation;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    order_stream.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t b = std::min(bs, n - start);
      MatrixXd preds(n_classes, static_cast<Eigen::Index>(b));
      MatrixXd labels(n_classes, static_cast<Eigen::Index>(b));
      MatrixXd bits(1, static_cast<Eigen::Index>(b));
      for (std::size_t j = 0; j < b; ++j) {
        const MembershipRecord& rec = data[order[start + j]];
        preds.col(static_cast<Eigen::Index>(j)) = rec.prediction;
        labels.col(static_cast<Eigen::Index>(j)) = rec.label_onehot;
        bits(0, static_cast<Eigen::Index>(j)) = rec.membership;
      }
      const double inv_b = 1.0 / static_cast<double>(b);

      if (cfg.structure == MimStructure::kFlat) {
        nn::BatchTrace trace =
            nn::forward_trace(net.connection_net, flat_input(preds, labels));
        epoch_loss += nn::batch_loss_sum(cfg.loss, trace.acts.back(), bits);
        MatrixXd delta = nn::output_delta(net.connection_net, cfg.loss,
                                          trace.acts.back(), bits) *
                         inv_b;
        nn::BatchGradients grads;
        nn::backward(net.connection_net, trace, std::move(delta), &grads);
        nn::sgd_step(net.connection_net, grads, tcfg.learning_rate);
      } else {
        CompositeTrace t = composite_forward(net, preds, labels);
        epoch_loss +=
            nn::batch_loss_sum(cfg.loss, t.connection.acts.back(), bits);
        MatrixXd delta = nn::output_delta(net.connection_net, cfg.loss,
                                          t.connection.acts.back(), bits) *
                         inv_b;
        nn::BatchGradients conn_grads;
        MatrixXd d_concat = nn::backward(net.connection_net, t.connection,
                                         std::move(delta), &conn_grads);
        const Eigen::Index mu = t.pred_out.rows();
        MatrixXd d_pred_out =
            d_concat.topRows(mu).array() *
            nn::activation_derivative(act, t.prediction.acts.back(),
                                      t.pred_out)
                .array();
        MatrixXd d_label_out =
            d_concat.bottomRows(t.label_out.rows()).array() *
            nn::activation_derivative(act, t.label.acts.back(), t.label_out)
                .array();
        nn::BatchGradients pred_grads, label_grads;
        nn::backward(*net.prediction_net, t.prediction, std::move(d_pred_out),
                     &pred_grads);
        nn::backward(*net.label_net, t.label, std::move(d_label_out),
                     &label_grads);
        nn::sgd_step(net.connection_net, conn_grads, tcfg.learning_rate);
        nn::sgd_step(*net.prediction_net, pred_grads, tcfg.learning_rate);
        nn::sgd_step(*net.label_net, label_grads, tcfg.learning_rate);
      }
    }
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("inference model training diverged at epoch " +
                            std::to_string(epoch));
    }
  }
  return net;
}

MatrixXd prediction_gradient_batch(const MembershipInferenceNet& net,
                                   const MatrixXd& predictions,
                                   const MatrixXd& labels,
                                   const VectorXd& target_bits,
                                   nn::LossKind loss, VectorXd* losses_out,
                                   VectorXd* probs_out) {
  check_widths(net, predictions, labels);
  if (target_bits.size() != predictions.cols()) {
    throw ShapeError("one target bit per record is required");
  }
  nn::validate_loss_head(loss, nn::OutputHead::kSigmoid);
  const MatrixXd bits = target_bits.transpose();

  if (net.structure == MimStructure::kFlat) {
    nn::BatchTrace trace =
        nn::forward_trace(net.connection_net, flat_input(predictions, labels));
    const MatrixXd& probs = trace.acts.back();
    if (probs_out) *probs_out = probs.row(0);
    if (losses_out) {
      losses_out->resize(predictions.cols());
      for (Eigen::Index c = 0; c < predictions.cols(); ++c) {
        (*losses_out)[c] =
            nn::loss_value(loss, probs.col(c), bits.col(c));
      }
    }
    MatrixXd delta = nn::output_delta(net.connection_net, loss, probs, bits);
    MatrixXd d_input =
        nn::backward(net.connection_net, trace, std::move(delta), nullptr);
    return d_input.topRows(predictions.rows());
  }

  CompositeTrace t = composite_forward(net, predictions, labels);
  const MatrixXd& probs = t.connection.acts.back();
  if (probs_out) *probs_out = probs.row(0);
  if (losses_out) {
    losses_out->resize(predictions.cols());
    for (Eigen::Index c = 0; c < predictions.cols(); ++c) {
      (*losses_out)[c] = nn::loss_value(loss, probs.col(c), bits.col(c));
    }
  }
  MatrixXd delta = nn::output_delta(net.connection_net, loss, probs, bits);
  MatrixXd d_concat =
      nn::backward(net.connection_net, t.connection, std::move(delta), nullptr);
  const nn::Activation act = net.prediction_net->spec.hidden_activation;
  MatrixXd d_pred_out =
      d_concat.topRows(t.pred_out.rows()).array() *
      nn::activation_derivative(act, t.prediction.acts.back(), t.pred_out)
          .array();
  return nn::backward(*net.prediction_net, t.prediction, std::move(d_pred_out),
                      nullptr);
}

VectorXd prediction_gradient(const MembershipInferenceNet& net,
                             const PredictionVector& prediction,
                             const VectorXd& label_onehot, int target_bit,
                             nn::LossKind loss, double* loss_out,
                             double* prob_out) {
  VectorXd bits(1);
  bits[0] = target_bit;
  VectorXd losses, probs;
  MatrixXd g = prediction_gradient_batch(net, prediction, label_onehot, bits,
                                         loss, loss_out ? &losses : nullptr,
                                         prob_out ? &probs : nullptr);
  if (loss_out) *loss_out = losses[0];
  if (prob_out) *prob_out = probs[0];
  return g.col(0);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

void save_mim_file(const std::filesystem::path& path,
                   const MembershipInferenceNet& net, MimVariant variant,
                   std::span<const std::string> extra_annotations) {
  net.validate();
  std::ostringstream out;
  out << "mim v1\n";
  out << "variant " << to_string(variant) << '\n';
  out << "structure "
      << (net.structure == MimStructure::kComposite ? "composite" : "flat")
      << '\n';
  std::vector<std::string> annotations{std::string("role=mim:") +
                                       to_string(variant)};
  annotations.insert(annotations.end(), extra_annotations.begin(),
                     extra_annotations.end());
  out << "annotations " << annotations.size() << '\n';
  for (const auto& a : annotations) out << a << '\n';
  if (net.structure == MimStructure::kComposite) {
    nn::save_checkpoint(out, *net.prediction_net);
    nn::save_checkpoint(out, *net.label_net);
  }
  nn::save_checkpoint(out, net.connection_net);
  out << "end mim\n";
  util::write_file(path, out.str());
}

MembershipInferenceNet load_mim_file(const std::filesystem::path& path,
                                     MimVariant* variant,
                                     std::vector<std::string>* annotations) {
  std::istringstream in(util::read_file(path));
  std::string line;
  auto want = [&](const char* what) {
    if (!std::getline(in, line)) {
      throw IoError(std::string("mim checkpoint truncated at ") + what);
    }
    return line;
  };
  if (want("header") != "mim v1") throw IoError("bad mim checkpoint header");
  std::istringstream vs(want("variant"));
  std::string tag, value;
  vs >> tag >> value;
  if (tag != "variant") throw IoError("bad mim variant line");
  if (variant) *variant = parse_mim_variant(value);
  std::istringstream ss(want("structure"));
  ss >> tag >> value;
  if (tag != "structure") throw IoError("bad mim structure line");

  MembershipInferenceNet net;
  if (value == "composite") {
    net.structure = MimStructure::kComposite;
  } else if (value == "flat") {
    net.structure = MimStructure::kFlat;
  } else {
    throw IoError("unknown mim structure: " + value);
  }

  std::istringstream as(want("annotations"));
  as >> tag >> value;
  if (tag != "annotations") throw IoError("bad mim annotations line");
  const long long ann_count = util::parse_int(value);
  for (long long i = 0; i < ann_count; ++i) {
    std::string a = want("annotation");
    if (annotations) annotations->push_back(a);
  }

  if (net.structure == MimStructure::kComposite) {
    net.prediction_net = nn::load_checkpoint(in);
    net.label_net = nn::load_checkpoint(in);
  }
  net.connection_net = nn::load_checkpoint(in);
  if (want("trailer") != "end mim") throw IoError("bad mim trailer");
  net.validate();
  return net;
}

}  // namespace aeppt
