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

#include "aeppt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "aeppt/util.hpp"

namespace aeppt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ConfusionCounts::accuracy() const {
  const long t = total();
  if (t == 0) throw DomainError("accuracy of an empty confusion matrix");
  return static_cast<double>(tp + tn) / static_cast<double>(t);
}

std::optional<double> ConfusionCounts::precision() const {
  if (tp + fp == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::optional<double> ConfusionCounts::recall() const {
  if (tp + fn == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

ConfusionCounts confusion(std::span<const int> decisions,
                          std::span<const int> truth) {
  if (decisions.size() != truth.size()) {
    throw SizeError("decision/truth length mismatch");
  }
  if (decisions.empty()) throw SizeError("empty decision set");
  ConfusionCounts c;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (truth[i]) {
      decisions[i] ? ++c.tp : ++c.fn;
    } else {
      decisions[i] ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw DomainError("empirical CDF of an empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double w) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), w);
  return static_cast<double>(it - sorted_.begin()) /
         static_cast<double>(sorted_.size());
}

std::vector<std::pair<double, double>> EmpiricalCdf::points() const {
  std::vector<std::pair<double, double>> pts;
  const double m = static_cast<double>(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) {
    if (i + 1 < sorted_.size() && sorted_[i + 1] == sorted_[i]) continue;
    pts.emplace_back(sorted_[i], static_cast<double>(i + 1) / m);
  }
  return pts;
}

std::vector<EvalExample> make_eval_examples(const TargetModel& target,
                                            std::span<const Record> records,
                                            int membership) {
  std::vector<EvalExample> out;
  if (records.empty()) return out;
  const MatrixXd preds = predict_records(target, records);
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(EvalExample{records[i].label, membership,
                              preds.col(static_cast<Eigen::Index>(i)), 0.0});
  }
  return out;
}

std::vector<int> mim_decisions(const MembershipInferenceNet& mim,
                               std::span<const EvalExample> examples) {
  if (examples.empty()) return {};
  const int k = mim.input_classes();
  MatrixXd preds(k, static_cast<Eigen::Index>(examples.size()));
  MatrixXd labels(k, static_cast<Eigen::Index>(examples.size()));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    preds.col(static_cast<Eigen::Index>(i)) = examples[i].prediction;
    labels.col(static_cast<Eigen::Index>(i)) =
        one_hot(examples[i].label, k);
  }
  const VectorXd probs = mim_forward_batch(mim, preds, labels);
  std::vector<int> decisions(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    decisions[i] = probs[static_cast<Eigen::Index>(i)] >= 0.5 ? 1 : 0;
  }
  return decisions;
}

AttackReport evaluate_attack(const MembershipInferenceNet& mim,
                             std::span<const EvalExample> members,
                             std::span<const EvalExample> non_members,
                             const ReportMeta& meta) {
  if (members.empty() || non_members.empty()) {
    throw SizeError("evaluation sets must be nonempty");
  }
  if (members.size() != non_members.size()) {
    throw SizeError("evaluation sets must be balanced");
  }

  std::vector<EvalExample> all(members.begin(), members.end());
  all.insert(all.end(), non_members.begin(), non_members.end());
  std::vector<int> truth(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) truth[i] = all[i].membership;

  const std::vector<int> decisions = mim_decisions(mim, all);

  AttackReport report;
  report.attack = meta.attack;
  report.defense_mode = meta.defended ? "on" : "off";
  report.fingerprint = meta.fingerprint;
  report.epsilon = meta.epsilon;
  report.iterations = meta.iterations;
  report.counts = confusion(decisions, truth);
  report.inference_accuracy = report.counts.accuracy();
  report.precision = report.counts.precision();
  report.recall = report.counts.recall();

  // Per-class aggregation over the record's true class.
  std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_class;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& [d, t] = by_class[all[i].label];
    d.push_back(decisions[i]);
    t.push_back(truth[i]);
  }
  std::vector<double> accs, precs, recalls;
  for (const auto& [label, dt] : by_class) {
    const ConfusionCounts c = confusion(dt.first, dt.second);
    PerClassMetrics m;
    m.eval_count = static_cast<int>(dt.first.size());
    m.accuracy = c.accuracy();
    m.precision = c.precision();
    m.recall = c.recall();
    accs.push_back(m.accuracy);
    if (m.precision) precs.push_back(*m.precision);
    if (m.recall) recalls.push_back(*m.recall);
    report.per_class.emplace(label, std::move(m));
  }
  report.cdf_points = EmpiricalCdf(accs).points();
  if (!precs.empty()) report.cdf_precision = EmpiricalCdf(precs).points();
  if (!recalls.empty()) report.cdf_recall = EmpiricalCdf(recalls).points();

  if (meta.defended) {
    PerturbationStats stats;
    stats.min = all.front().l1;
    stats.max = all.front().l1;
    double total = 0.0;
    for (const auto& e : all) {
      total += e.l1;
      stats.min = std::min(stats.min, e.l1);
      stats.max = std::max(stats.max, e.l1);
    }
    stats.mean = total / static_cast<double>(all.size());
    report.perturbation = stats;
  }
  return report;
}

std::vector<double> capture_loss_curve(const MembershipInferenceNet& mim,
                                       std::span<const TraceContext> traced) {
  if (traced.empty()) return {};
  const std::size_t iterations = traced.front().trace->iterates.size();
  if (iterations == 0) return {};  // diagnostics were disabled
  for (const auto& ctx : traced) {
    if (ctx.trace->iterates.size() != iterations) {
      throw SizeError("traces disagree on the iteration count");
    }
  }

  const int k = mim.input_classes();
  MatrixXd labels(k, static_cast<Eigen::Index>(traced.size()));
  MatrixXd bits(1, static_cast<Eigen::Index>(traced.size()));
  for (std::size_t i = 0; i < traced.size(); ++i) {
    labels.col(static_cast<Eigen::Index>(i)) = traced[i].label_onehot;
    bits(0, static_cast<Eigen::Index>(i)) = traced[i].membership;
  }

  std::vector<double> curve(iterations, 0.0);
  MatrixXd preds(k, static_cast<Eigen::Index>(traced.size()));
  for (std::size_t t = 0; t < iterations; ++t) {
    for (std::size_t i = 0; i < traced.size(); ++i) {
      preds.col(static_cast<Eigen::Index>(i)) = traced[i].trace->iterates[t];
    }
    const VectorXd probs = mim_forward_batch(mim, preds, labels);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      VectorXd p(1), b(1);
      p[0] = probs[i];
      b[0] = bits(0, i);
      sum += nn::loss_value(nn::LossKind::kBinaryCrossEntropy, p, b);
    }
    curve[t] = sum / static_cast<double>(traced.size());
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Report files

namespace {

std::string opt_str(const std::optional<double>& v) {
  return v ? util::format_double(*v) : "absent";
}

std::optional<double> parse_opt(std::string_view s) {
  if (s == "absent") return std::nullopt;
  return util::parse_double(s);
}

}  // namespace

void save_report(std::ostream& out, const AttackReport& report) {
  out << "attack_report v1\n";
  out << "fingerprint=" << report.fingerprint << '\n';
  out << "attack=" << report.attack << '\n';
  out << "defense=" << report.defense_mode << '\n';
  out << "epsilon=" << util::format_double(report.epsilon) << '\n';
  out << "iterations=" << report.iterations << '\n';
  out << "tp=" << report.counts.tp << '\n';
  out << "fp=" << report.counts.fp << '\n';
  out << "tn=" << report.counts.tn << '\n';
  out << "fn=" << report.counts.fn << '\n';
  out << "accuracy=" << util::format_double(report.inference_accuracy) << '\n';
  out << "precision=" << opt_str(report.precision) << '\n';
  out << "recall=" << opt_str(report.recall) << '\n';
  if (report.perturbation) {
    out << "perturbation_mean=" << util::format_double(report.perturbation->mean)
        << '\n';
    out << "perturbation_min=" << util::format_double(report.perturbation->min)
        << '\n';
    out << "perturbation_max=" << util::format_double(report.perturbation->max)
        << '\n';
  }
  out << "classes=" << report.per_class.size() << '\n';
  for (const auto& [label, m] : report.per_class) {
    out << "class " << label << ' ' << m.eval_count << ' '
        << util::format_double(m.accuracy) << ' ' << opt_str(m.precision)
        << ' ' << opt_str(m.recall) << '\n';
  }
  out << "cdf_points=" << report.cdf_points.size() << '\n';
  for (const auto& [value, frac] : report.cdf_points) {
    out << "cdf " << util::format_double(value) << ' '
        << util::format_double(frac) << '\n';
  }
  out << "end attack_report\n";
}

AttackReport load_report(std::istream& in) {
  AttackReport report;
  std::string line;
  if (!std::getline(in, line) || line != "attack_report v1") {
    throw IoError("malformed report header");
  }
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) {
      throw IoError(std::string("report truncated at ") + what);
    }
    return line;
  };
  auto value_of = [](const std::string& l, const char* key) {
    const std::string k = std::string(key) + "=";
    if (l.rfind(k, 0) != 0) {
      throw IoError("report: expected '" + k + "...', got '" + l + "'");
    }
    return l.substr(k.size());
  };
  report.fingerprint = value_of(next("fingerprint"), "fingerprint");
  report.attack = value_of(next("attack"), "attack");
  report.defense_mode = value_of(next("defense"), "defense");
  report.epsilon = util::parse_double(value_of(next("epsilon"), "epsilon"));
  report.iterations =
      static_cast<int>(util::parse_int(value_of(next("iterations"), "iterations")));
  report.counts.tp = util::parse_int(value_of(next("tp"), "tp"));
  report.counts.fp = util::parse_int(value_of(next("fp"), "fp"));
  report.counts.tn = util::parse_int(value_of(next("tn"), "tn"));
  report.counts.fn = util::parse_int(value_of(next("fn"), "fn"));
  report.inference_accuracy =
      util::parse_double(value_of(next("accuracy"), "accuracy"));
  report.precision = parse_opt(value_of(next("precision"), "precision"));
  report.recall = parse_opt(value_of(next("recall"), "recall"));
  next("perturbation or classes");
  if (line.rfind("perturbation_mean=", 0) == 0) {
    PerturbationStats stats;
    stats.mean = util::parse_double(value_of(line, "perturbation_mean"));
    stats.min = util::parse_double(
        value_of(next("perturbation_min"), "perturbation_min"));
    stats.max = util::parse_double(
        value_of(next("perturbation_max"), "perturbation_max"));
    report.perturbation = stats;
    next("classes");
  }
  const long long classes = util::parse_int(value_of(line, "classes"));
  for (long long i = 0; i < classes; ++i) {
    std::istringstream row(next("class row"));
    std::string tag, prec, rec;
    int label = 0;
    PerClassMetrics m;
    row >> tag >> label >> m.eval_count >> m.accuracy >> prec >> rec;
    if (tag != "class" || row.fail()) throw IoError("malformed class row");
    m.precision = parse_opt(prec);
    m.recall = parse_opt(rec);
    report.per_class.emplace(label, std::move(m));
  }
  const long long cdf_count =
      util::parse_int(value_of(next("cdf_points"), "cdf_points"));
  for (long long i = 0; i < cdf_count; ++i) {
    std::istringstream row(next("cdf row"));
    std::string tag;
    double value = 0.0, frac = 0.0;
    row >> tag >> value >> frac;
    if (tag != "cdf" || row.fail()) throw IoError("malformed cdf row");
    report.cdf_points.emplace_back(value, frac);
  }
  if (next("trailer") != "end attack_report") {
    throw IoError("malformed report trailer");
  }
  return report;
}

void save_report_csv(std::ostream& out, const AttackReport& report) {
  out << "section,label,count,accuracy,precision,recall\n";
  out << "overall,,," << util::format_double(report.inference_accuracy) << ','
      << opt_str(report.precision) << ',' << opt_str(report.recall) << '\n';
  for (const auto& [label, m] : report.per_class) {
    out << "class," << label << ',' << m.eval_count << ','
        << util::format_double(m.accuracy) << ',' << opt_str(m.precision)
        << ',' << opt_str(m.recall) << '\n';
  }
  auto emit_cdf = [&out](const char* name,
                         const std::vector<std::pair<double, double>>& pts) {
    for (const auto& [value, frac] : pts) {
      out << "cdf_" << name << ",,," << util::format_double(value) << ','
          << util::format_double(frac) << ",\n";
    }
  };
  emit_cdf("accuracy", report.cdf_points);
  emit_cdf("precision", report.cdf_precision);
  emit_cdf("recall", report.cdf_recall);
}

}  // namespace aeppt
