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

#include "aeppt/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "aeppt/rng.hpp"
#include "aeppt/util.hpp"

namespace aeppt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kEpsilon:
      return "epsilon";
    case SweepAxis::kClasses:
      return "classes";
    default:
      return "adv_fraction";
  }
}

SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "epsilon") return SweepAxis::kEpsilon;
  if (s == "classes") return SweepAxis::kClasses;
  if (s == "adv_fraction") return SweepAxis::kAdvFraction;
  throw SpecError("unknown sweep axis: '" + std::string(s) + "'");
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  fingerprint_ = cfg_.fingerprint();
}

namespace {

std::filesystem::path join(const std::string& dir, const char* name) {
  return std::filesystem::path(dir) / name;
}

}  // namespace

std::filesystem::path Experiment::dataset_path() const {
  return join(cfg_.out_dir, "dataset.txt");
}
std::filesystem::path Experiment::split_path() const {
  return join(cfg_.out_dir, "splits.txt");
}
std::filesystem::path Experiment::target_path() const {
  return join(cfg_.out_dir, "target.ckpt");
}
std::filesystem::path Experiment::mim_path(MimVariant v) const {
  return join(cfg_.out_dir,
              (std::string(to_string(v)) + ".ckpt").c_str());
}
std::filesystem::path Experiment::store_path() const {
  return join(cfg_.out_dir, "store_defended.txt");
}
std::filesystem::path Experiment::manifest_path() const {
  return join(cfg_.out_dir, "defense_manifest.txt");
}
std::filesystem::path Experiment::report_path(const std::string& name) const {
  return join(cfg_.out_dir, ("report_" + name + ".txt").c_str());
}
std::filesystem::path Experiment::sweep_path(SweepAxis axis) const {
  return join(cfg_.out_dir,
              (std::string("sweep_") + to_string(axis) + ".csv").c_str());
}
std::filesystem::path Experiment::loss_curve_path() const {
  return join(cfg_.out_dir, "losscurve.csv");
}

void Experiment::check_fingerprint(
    const std::vector<std::string>& annotations,
    const std::filesystem::path& path) const {
  for (const auto& a : annotations) {
    if (a == "fingerprint=" + fingerprint_) return;
  }
  throw ConfigError("artifact '" + path.string() +
                    "' was produced by a different configuration");
}

void Experiment::run_synth() {
  SynthesisConfig syn = cfg_.synthesis;
  syn.seed = cfg_.seed_for("synthesis");
  const std::vector<VectorXd> vectors = synthesize(syn);
  const KMeansResult clusters =
      kmeans(vectors, cfg_.synthesis.n_classes, cfg_.seed_for("kmeans"));
  std::vector<Record> records;
  records.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    records.push_back(Record{vectors[i], clusters.assignment[i]});
  }
  centroids_ = clusters.centroids;

  std::ostringstream data_out;
  save_dataset(data_out, records, cfg_.synthesis.n_classes);
  util::write_file(dataset_path(), data_out.str());

  DatasetSplit split = make_splits(records, cfg_.member_count,
                                   cfg_.non_member_count, cfg_.adv_fraction,
                                   cfg_.seed_for("split"));
  std::ostringstream split_out;
  const std::vector<std::string> annotations{"fingerprint=" + fingerprint_};
  save_split(split_out, split, annotations);
  util::write_file(split_path(), split_out.str());

  dataset_ = std::move(records);
  split_ = std::move(split);
}

void Experiment::ensure_dataset() {
  if (dataset_) return;
  std::istringstream in(util::read_file(dataset_path()));
  int k = 0;
  dataset_ = load_dataset(in, &k);
  if (k != cfg_.synthesis.n_classes) {
    throw ConfigError("dataset class count disagrees with the configuration");
  }
}

void Experiment::ensure_split() {
  if (split_) return;
  ensure_dataset();
  std::istringstream in(util::read_file(split_path()));
  std::vector<std::string> annotations;
  split_ = load_split(in, *dataset_, &annotations);
  check_fingerprint(annotations, split_path());
}

void Experiment::ensure_target() {
  if (target_) return;
  std::vector<std::string> annotations;
  target_ = load_target_file(target_path(), &annotations);
  check_fingerprint(annotations, target_path());
}

void Experiment::ensure_mim(MimVariant v) {
  if (mims_.contains(v)) return;
  std::vector<std::string> annotations;
  MimVariant stored = v;
  MembershipInferenceNet net = load_mim_file(mim_path(v), &stored, &annotations);
  if (stored != v) {
    throw IoError("checkpoint variant mismatch at " + mim_path(v).string());
  }
  check_fingerprint(annotations, mim_path(v));
  mims_.emplace(v, std::move(net));
}

std::vector<MembershipRecord> Experiment::adversary_training_rows(
    MimVariant v) {
  ensure_split();
  ensure_target();
  const DatasetSplit& split = *split_;
  const std::vector<Record> adv_members =
      split.records_at(split.adv_member, true);

  if (v != MimVariant::kMim3) {
    const std::vector<Record> adv_non_members =
        split.records_at(split.adv_non_member, false);
    return build_mim_training_set(*target_, adv_members, adv_non_members,
                                  cfg_.seed_for("adv-mim-data"));
  }

  // mim3: non-member side drawn from a shifted synthesis distribution,
  // labeled by the dataset's own cluster centroids.
  if (!centroids_) {
    ensure_dataset();
    std::vector<VectorXd> vectors;
    vectors.reserve(dataset_->size());
    for (const auto& rec : *dataset_) vectors.push_back(rec.features);
    centroids_ =
        kmeans(vectors, cfg_.synthesis.n_classes, cfg_.seed_for("kmeans"))
            .centroids;
  }
  SynthesisConfig shifted = cfg_.synthesis;
  shifted.n_records = static_cast<int>(split.adv_non_member.size());
  shifted.flip_prob = cfg_.mim3_flip_prob;
  shifted.seed = cfg_.seed_for("synthesis-mim3");
  const std::vector<VectorXd> raw = synthesize(shifted);
  std::vector<Record> shifted_records;
  shifted_records.reserve(raw.size());
  for (const auto& x : raw) {
    int best = 0;
    double best_d = (x - centroids_->col(0)).squaredNorm();
    for (Eigen::Index j = 1; j < centroids_->cols(); ++j) {
      const double d = (x - centroids_->col(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    shifted_records.push_back(Record{x, best});
  }
  return build_mim_training_set(*target_, adv_members, shifted_records,
                                cfg_.seed_for("adv-mim-data-mim3"));
}

void Experiment::run_train(const std::string& role) {
  ensure_split();
  const std::vector<std::string> annotations{"fingerprint=" + fingerprint_};

  if (role == "target") {
    nn::TrainConfig tcfg = cfg_.target_train;
    tcfg.seed = cfg_.seed_for("target-train");
    target_ = train_target(*split_, cfg_.target_spec(), tcfg);
    save_target_file(target_path(), *target_, annotations);
    return;
  }

  if (role == "substitute") {
    ensure_target();
    const DatasetSplit& split = *split_;
    // The defender trains on everything it serves: all members and all
    // non-members.
    const std::vector<MembershipRecord> rows = build_mim_training_set(
        *target_, split.records_at(split.sub_member, true),
        split.records_at(split.sub_non_member, false),
        cfg_.seed_for("substitute-data"));
    nn::TrainConfig tcfg = cfg_.mim_train;
    tcfg.seed = cfg_.seed_for("mim-train-substitute");
    MembershipInferenceNet net =
        train_mim(cfg_.mim_variant(MimVariant::kSubstitute),
                  cfg_.synthesis.n_classes, rows, tcfg);
    save_mim_file(mim_path(MimVariant::kSubstitute), net,
                  MimVariant::kSubstitute, annotations);
    mims_.insert_or_assign(MimVariant::kSubstitute, std::move(net));
    return;
  }

  if (role.rfind("mim:", 0) == 0) {
    const MimVariant v = parse_mim_variant(role.substr(4));
    if (v == MimVariant::kSubstitute) {
      throw ConfigError("use role=substitute for the defender's model");
    }
    ensure_target();
    const std::vector<MembershipRecord> rows = adversary_training_rows(v);
    nn::TrainConfig tcfg = cfg_.mim_train;
    tcfg.seed = cfg_.seed_for("mim-train", static_cast<std::uint64_t>(v));
    MembershipInferenceNet net =
        train_mim(cfg_.mim_variant(v), cfg_.synthesis.n_classes, rows, tcfg);
    save_mim_file(mim_path(v), net, v, annotations);
    mims_.insert_or_assign(v, std::move(net));
    return;
  }

  throw ConfigError("unknown training role: '" + role + "'");
}

std::pair<std::vector<int>, std::vector<int>> Experiment::eval_indices() {
  ensure_split();
  std::vector<int> members = split_->eval_member_indices();
  std::vector<int> non_members = split_->eval_non_member_indices();
  if (members.empty() || non_members.empty()) {
    throw SizeError("adv_fraction leaves no held-out evaluation records");
  }
  // Balance by seeded subsampling of the larger side.
  const std::size_t n = std::min(members.size(), non_members.size());
  rng::Stream stream(cfg_.seed_for("eval-balance"));
  auto shrink = [&stream, n](std::vector<int>& v) {
    if (v.size() == n) return;
    stream.shuffle(v);
    v.resize(n);
    std::sort(v.begin(), v.end());
  };
  shrink(members);
  shrink(non_members);
  return {std::move(members), std::move(non_members)};
}

namespace {

std::vector<DefendedExample> pair_defended(
    std::span<const Record> records, std::span<const PerturbationTrace> traces,
    int membership) {
  std::vector<DefendedExample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(DefendedExample{records[i].label, membership,
                                  traces[i].original, traces[i].adversarial,
                                  traces[i].l1_size});
  }
  return out;
}

MatrixXd predictions_of(const TargetModel& target,
                        std::span<const Record> records) {
  return predict_records(target, records);
}

}  // namespace

PredictionStore Experiment::build_store() {
  ensure_split();
  ensure_target();
  ensure_mim(MimVariant::kSubstitute);
  const MembershipInferenceNet& substitute = mims_.at(MimVariant::kSubstitute);
  const DatasetSplit& split = *split_;

  DefenseConfig defense = cfg_.defense;
  defense.seed = cfg_.seed_for("defense");

  const auto [eval_m_idx, eval_n_idx] = eval_indices();
  PredictionStore store;
  store.fingerprint = fingerprint_;
  store.epsilon = defense.epsilon;
  store.iterations = defense.iterations;
  store.seed = defense.seed;
  store.substitute_hash =
      util::hash_file(mim_path(MimVariant::kSubstitute));

  struct SetPlan {
    const char* name;
    std::vector<Record> records;
    int membership;
    std::vector<DefendedExample>* dest;
  };
  SetPlan plans[] = {
      {"adv_member", split.records_at(split.adv_member, true), 1,
       &store.adv_member},
      {"adv_non_member", split.records_at(split.adv_non_member, false), 0,
       &store.adv_non_member},
      {"eval_member", split.records_at(eval_m_idx, true), 1,
       &store.eval_member},
      {"eval_non_member", split.records_at(eval_n_idx, false), 0,
       &store.eval_non_member},
  };
  for (auto& plan : plans) {
    const MatrixXd preds = predictions_of(*target_, plan.records);
    const std::vector<PerturbationTrace> traces = generate_adversarial_batch(
        preds, substitute, defense, plan.name, 0, cfg_.threads);
    *plan.dest = pair_defended(plan.records, traces, plan.membership);
  }
  return store;
}

void Experiment::write_manifest(const PredictionStore& s) const {
  std::vector<const std::vector<DefendedExample>*> sets = {
      &s.adv_member, &s.adv_non_member, &s.eval_member, &s.eval_non_member};
  std::size_t count = 0;
  double total = 0.0, lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto* rows : sets) {
    for (const auto& row : *rows) {
      if (first) {
        lo = hi = row.l1;
        first = false;
      }
      total += row.l1;
      lo = std::min(lo, row.l1);
      hi = std::max(hi, row.l1);
      ++count;
    }
  }
  std::ostringstream out;
  out << "defense_manifest v1\n";
  out << "fingerprint=" << s.fingerprint << '\n';
  out << "epsilon=" << util::format_double(s.epsilon) << '\n';
  out << "iterations=" << s.iterations << '\n';
  out << "seed=" << s.seed << '\n';
  out << "substitute_checkpoint_hash=" << s.substitute_hash << '\n';
  out << "records=" << count << '\n';
  out << "l1_mean=" << util::format_double(count ? total / count : 0.0) << '\n';
  out << "l1_min=" << util::format_double(lo) << '\n';
  out << "l1_max=" << util::format_double(hi) << '\n';
  out << "end defense_manifest\n";
  util::write_file(manifest_path(), out.str());
}

void Experiment::ensure_store() {
  if (store_) return;
  if (std::filesystem::exists(store_path())) {
    PredictionStore loaded = load_store_file(store_path());
    if (loaded.fingerprint == fingerprint_ &&
        loaded.epsilon == cfg_.defense.epsilon &&
        loaded.iterations == cfg_.defense.iterations) {
      store_ = std::move(loaded);
      return;
    }
  }
  store_ = build_store();
  save_store_file(store_path(), *store_);
  write_manifest(*store_);
}

AttackReport Experiment::run_evaluate(MimVariant attack, bool defended) {
  if (attack == MimVariant::kSubstitute) {
    throw ConfigError("evaluate expects an adversary model (mim0..mim3)");
  }
  ensure_split();
  ensure_target();
  ensure_mim(attack);

  ReportMeta meta;
  meta.attack = to_string(attack);
  meta.defended = defended;
  meta.fingerprint = fingerprint_;
  meta.epsilon = defended ? cfg_.defense.epsilon : 0.0;
  meta.iterations = defended ? cfg_.defense.iterations : 0;

  AttackReport report;
  if (defended) {
    ensure_store();
    report = evaluate_attack(mims_.at(attack),
                             store_->eval_examples(true, true),
                             store_->eval_examples(false, true), meta);
  } else {
    const auto [eval_m_idx, eval_n_idx] = eval_indices();
    const std::vector<Record> members = split_->records_at(eval_m_idx, true);
    const std::vector<Record> non_members =
        split_->records_at(eval_n_idx, false);
    report = evaluate_attack(mims_.at(attack),
                             make_eval_examples(*target_, members, 1),
                             make_eval_examples(*target_, non_members, 0),
                             meta);
  }

  const std::string base =
      std::string(to_string(attack)) + (defended ? "_on" : "_off");
  std::ostringstream txt;
  save_report(txt, report);
  util::write_file(report_path(base), txt.str());
  std::ostringstream csv;
  save_report_csv(csv, report);
  util::write_file(join(cfg_.out_dir, ("report_" + base + ".csv").c_str()),
                   csv.str());
  return report;
}

void save_sweep_csv(std::ostream& out, SweepAxis axis,
                    std::string_view fingerprint,
                    std::span<const SweepRow> rows) {
  out << "# sweep v1 axis=" << to_string(axis) << " fingerprint=" << fingerprint
      << '\n';
  out << "axis,mean_l1,accuracy,precision,recall\n";
  for (const auto& row : rows) {
    out << util::format_double(row.axis_value) << ','
        << util::format_double(row.mean_l1) << ','
        << util::format_double(row.accuracy) << ','
        << (row.precision ? util::format_double(*row.precision) : "absent")
        << ','
        << (row.recall ? util::format_double(*row.recall) : "absent") << '\n';
  }
}

SweepRow Experiment::grid_point_row(const ExperimentConfig& sub,
                                    double axis_value, int threads) {
  SynthesisConfig syn = sub.synthesis;
  syn.seed = sub.seed_for("synthesis");
  const std::vector<VectorXd> vectors = synthesize(syn);
  const KMeansResult clusters =
      kmeans(vectors, sub.synthesis.n_classes, sub.seed_for("kmeans"));
  std::vector<Record> records;
  records.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    records.push_back(Record{vectors[i], clusters.assignment[i]});
  }
  const DatasetSplit split =
      make_splits(records, sub.member_count, sub.non_member_count,
                  sub.adv_fraction, sub.seed_for("split"));

  nn::TrainConfig target_cfg = sub.target_train;
  target_cfg.seed = sub.seed_for("target-train");
  const TargetModel target =
      train_target(split, sub.target_spec(), target_cfg);

  nn::TrainConfig sub_cfg = sub.mim_train;
  sub_cfg.seed = sub.seed_for("mim-train-substitute");
  const MembershipInferenceNet substitute = train_mim(
      sub.mim_variant(MimVariant::kSubstitute), sub.synthesis.n_classes,
      build_mim_training_set(target, split.records_at(split.sub_member, true),
                             split.records_at(split.sub_non_member, false),
                             sub.seed_for("substitute-data")),
      sub_cfg);

  nn::TrainConfig mim_cfg = sub.mim_train;
  mim_cfg.seed =
      sub.seed_for("mim-train", static_cast<std::uint64_t>(MimVariant::kMim0));
  const MembershipInferenceNet mim0 = train_mim(
      sub.mim_variant(MimVariant::kMim0), sub.synthesis.n_classes,
      build_mim_training_set(target, split.records_at(split.adv_member, true),
                             split.records_at(split.adv_non_member, false),
                             sub.seed_for("adv-mim-data")),
      mim_cfg);

  // Balanced held-out evaluation rows.
  std::vector<int> eval_m = split.eval_member_indices();
  std::vector<int> eval_n = split.eval_non_member_indices();
  if (eval_m.empty() || eval_n.empty()) {
    throw SizeError("grid point leaves no held-out evaluation records");
  }
  const std::size_t n = std::min(eval_m.size(), eval_n.size());
  rng::Stream balance(sub.seed_for("eval-balance"));
  auto shrink = [&balance, n](std::vector<int>& v) {
    if (v.size() == n) return;
    balance.shuffle(v);
    v.resize(n);
    std::sort(v.begin(), v.end());
  };
  shrink(eval_m);
  shrink(eval_n);

  DefenseConfig defense = sub.defense;
  defense.seed = sub.seed_for("defense");
  const std::vector<Record> members = split.records_at(eval_m, true);
  const std::vector<Record> non_members = split.records_at(eval_n, false);
  const std::vector<PerturbationTrace> m_traces = generate_adversarial_batch(
      predict_records(target, members), substitute, defense, "eval_member", 0,
      threads);
  const std::vector<PerturbationTrace> n_traces = generate_adversarial_batch(
      predict_records(target, non_members), substitute, defense,
      "eval_non_member", 0, threads);

  std::vector<EvalExample> member_examples, non_member_examples;
  for (std::size_t i = 0; i < members.size(); ++i) {
    member_examples.push_back(EvalExample{
        members[i].label, 1, m_traces[i].adversarial, m_traces[i].l1_size});
  }
  for (std::size_t i = 0; i < non_members.size(); ++i) {
    non_member_examples.push_back(EvalExample{non_members[i].label, 0,
                                              n_traces[i].adversarial,
                                              n_traces[i].l1_size});
  }
  ReportMeta meta{"mim0", true, sub.fingerprint(), defense.epsilon,
                  defense.iterations};
  const AttackReport report =
      evaluate_attack(mim0, member_examples, non_member_examples, meta);
  return SweepRow{axis_value, report.perturbation->mean,
                  report.inference_accuracy, report.precision, report.recall};
}

std::vector<SweepRow> Experiment::run_sweep(SweepAxis axis) {
  std::vector<SweepRow> rows;

  if (axis == SweepAxis::kEpsilon) {
    if (cfg_.sweep_epsilons.empty()) {
      throw ConfigError("sweep.epsilons is empty");
    }
    ensure_split();
    ensure_target();
    ensure_mim(MimVariant::kSubstitute);
    ensure_mim(MimVariant::kMim0);
    const auto [eval_m_idx, eval_n_idx] = eval_indices();
    const std::vector<Record> members = split_->records_at(eval_m_idx, true);
    const std::vector<Record> non_members =
        split_->records_at(eval_n_idx, false);
    const MatrixXd member_preds = predict_records(*target_, members);
    const MatrixXd non_member_preds = predict_records(*target_, non_members);

    for (double epsilon : cfg_.sweep_epsilons) {
      DefenseConfig defense = cfg_.defense;
      defense.epsilon = epsilon;
      defense.seed = cfg_.seed_for("defense");
      // Record streams depend only on (seed, set name, index), never on
      // epsilon, so the row at the configured epsilon reproduces the
      // defended evaluation exactly and the epsilon=0 row is the
      // undefended baseline exactly.
      const std::vector<PerturbationTrace> m_traces =
          generate_adversarial_batch(member_preds,
                                     mims_.at(MimVariant::kSubstitute),
                                     defense, "eval_member", 0, cfg_.threads);
      const std::vector<PerturbationTrace> n_traces =
          generate_adversarial_batch(non_member_preds,
                                     mims_.at(MimVariant::kSubstitute),
                                     defense, "eval_non_member", 0,
                                     cfg_.threads);
      std::vector<EvalExample> member_examples, non_member_examples;
      for (std::size_t i = 0; i < members.size(); ++i) {
        member_examples.push_back(EvalExample{members[i].label, 1,
                                              m_traces[i].adversarial,
                                              m_traces[i].l1_size});
      }
      for (std::size_t i = 0; i < non_members.size(); ++i) {
        non_member_examples.push_back(EvalExample{non_members[i].label, 0,
                                                  n_traces[i].adversarial,
                                                  n_traces[i].l1_size});
      }
      ReportMeta meta{"mim0", true, fingerprint_, epsilon,
                      cfg_.defense.iterations};
      const AttackReport report =
          evaluate_attack(mims_.at(MimVariant::kMim0), member_examples,
                          non_member_examples, meta);
      rows.push_back(SweepRow{epsilon, report.perturbation->mean,
                              report.inference_accuracy, report.precision,
                              report.recall});
    }
  } else if (axis == SweepAxis::kClasses) {
    if (cfg_.sweep_classes.empty()) throw ConfigError("sweep.classes is empty");
    for (int k : cfg_.sweep_classes) {
      ExperimentConfig sub = cfg_;
      sub.synthesis.n_classes = k;
      if (sub.synthesis.n_latent_groups < k) sub.synthesis.n_latent_groups = k;
      rows.push_back(grid_point_row(sub, static_cast<double>(k), cfg_.threads));
    }
  } else {
    if (cfg_.sweep_adv_fractions.empty()) {
      throw ConfigError("sweep.adv_fractions is empty");
    }
    for (double fraction : cfg_.sweep_adv_fractions) {
      ExperimentConfig sub = cfg_;
      sub.adv_fraction = fraction;
      rows.push_back(grid_point_row(sub, fraction, cfg_.threads));
    }
  }

  std::ostringstream out;
  save_sweep_csv(out, axis, fingerprint_, rows);
  util::write_file(sweep_path(axis), out.str());
  return rows;
}

AttackReport Experiment::run_adaptive(AdaptiveKind kind,
                                      int rounding_decimals) {
  if (!std::filesystem::exists(store_path())) {
    throw MissingArtifactError(
        "defended prediction store not found; run evaluate --defense on "
        "first: " +
        store_path().string());
  }
  ensure_store();
  const PredictionStore& store = *store_;
  if (store.fingerprint != fingerprint_) {
    throw ConfigError("prediction store fingerprint mismatch");
  }

  ReportMeta meta;
  meta.attack = to_string(kind);
  meta.defended = true;
  meta.fingerprint = fingerprint_;
  meta.epsilon = store.epsilon;
  meta.iterations = store.iterations;

  AttackReport report;
  switch (kind) {
    case AdaptiveKind::kFlip: {
      ensure_mim(MimVariant::kMim0);
      report = flip_attack_report(mims_.at(MimVariant::kMim0), store, meta);
      break;
    }
    case AdaptiveKind::kRounding: {
      nn::TrainConfig tcfg = cfg_.mim_train;
      tcfg.seed = cfg_.seed_for("adaptive-rounding-train");
      report = rounding_attack(store, rounding_decimals,
                               cfg_.mim_variant(MimVariant::kMim0),
                               cfg_.synthesis.n_classes, tcfg, meta);
      break;
    }
    case AdaptiveKind::kAdversarialTraining: {
      ensure_mim(MimVariant::kMim0);
      nn::TrainConfig tcfg = cfg_.mim_train;
      tcfg.seed = cfg_.seed_for("adaptive-advtrain-train");
      DefenseConfig attacker_defense = cfg_.defense;
      attacker_defense.seed = cfg_.seed_for("adaptive-advtrain-defense");
      report = adversarial_training_attack(
          store, mims_.at(MimVariant::kMim0),
          cfg_.mim_variant(MimVariant::kMim0), cfg_.synthesis.n_classes, tcfg,
          attacker_defense, meta, cfg_.threads);
      break;
    }
  }

  std::ostringstream txt;
  save_report(txt, report);
  util::write_file(report_path(to_string(kind)), txt.str());
  return report;
}

std::vector<double> Experiment::run_loss_curve() {
  ensure_split();
  ensure_target();
  ensure_mim(MimVariant::kSubstitute);
  ensure_mim(MimVariant::kMim0);

  DefenseConfig defense = cfg_.defense;
  defense.seed = cfg_.seed_for("defense");

  // Diagnostics sample: the leading records of each evaluation set; their
  // per-record streams match the store's, so the traced iterates are the
  // ones actually served.
  const auto [eval_m_idx, eval_n_idx] = eval_indices();
  const std::size_t per_side = std::min(
      {static_cast<std::size_t>((cfg_.diagnostics_sample + 1) / 2),
       eval_m_idx.size(), eval_n_idx.size()});
  if (per_side == 0) throw SizeError("no records for the diagnostics sample");

  std::vector<TraceContext> contexts;
  std::vector<PerturbationTrace> all_traces;
  const int k = cfg_.synthesis.n_classes;
  for (int side = 0; side < 2; ++side) {
    const auto& idx = side == 0 ? eval_m_idx : eval_n_idx;
    std::vector<Record> records =
        split_->records_at(std::span(idx).first(per_side), side == 0);
    const MatrixXd preds = predict_records(*target_, records);
    std::vector<PerturbationTrace> traces = generate_adversarial_batch(
        preds, mims_.at(MimVariant::kSubstitute), defense,
        side == 0 ? "eval_member" : "eval_non_member", 0, cfg_.threads,
        /*diagnostics=*/true);
    const std::size_t base = all_traces.size();
    for (auto& t : traces) all_traces.push_back(std::move(t));
    for (std::size_t i = 0; i < records.size(); ++i) {
      contexts.push_back(TraceContext{&all_traces[base + i],
                                      one_hot(records[i].label, k),
                                      side == 0 ? 1 : 0});
    }
  }

  const std::vector<double> curve =
      capture_loss_curve(mims_.at(MimVariant::kMim0), contexts);

  std::ostringstream out;
  out << "# losscurve v1 fingerprint=" << fingerprint_
      << " records=" << contexts.size() << '\n';
  out << "iteration,mean_loss\n";
  for (std::size_t t = 0; t < curve.size(); ++t) {
    out << t << ',' << util::format_double(curve[t]) << '\n';
  }
  util::write_file(loss_curve_path(), out.str());
  return curve;
}

const std::vector<Record>& Experiment::dataset() {
  ensure_dataset();
  return *dataset_;
}

const DatasetSplit& Experiment::split() {
  ensure_split();
  return *split_;
}

const TargetModel& Experiment::target() {
  ensure_target();
  return *target_;
}

const MembershipInferenceNet& Experiment::mim(MimVariant v) {
  ensure_mim(v);
  return mims_.at(v);
}

const PredictionStore& Experiment::store() {
  ensure_store();
  return *store_;
}

}  // namespace aeppt
