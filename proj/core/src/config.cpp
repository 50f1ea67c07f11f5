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

#include "aeppt/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "aeppt/rng.hpp"
#include "aeppt/util.hpp"

namespace aeppt {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(value);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<int> parse_int_list(const std::string& value) {
  std::vector<int> out;
  for (const auto& item : split_list(value)) {
    out.push_back(static_cast<int>(util::parse_int(item)));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) {
    out.push_back(util::parse_double(item));
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += util::format_double(v[i]);
  }
  return out;
}

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw IoError("expected a boolean, got '" + value + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.master_seed = util::parse_u64(v);
       }},
      {"out",
       [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
      {"threads",
       [](ExperimentConfig& c, const std::string& v) {
         c.threads = static_cast<int>(util::parse_int(v));
       }},
      {"diagnostics",
       [](ExperimentConfig& c, const std::string& v) {
         c.diagnostics = parse_bool(v);
       }},
      {"diagnostics.sample",
       [](ExperimentConfig& c, const std::string& v) {
         c.diagnostics_sample = static_cast<int>(util::parse_int(v));
       }},
      {"synthesis.n_records",
       [](ExperimentConfig& c, const std::string& v) {
         c.synthesis.n_records = static_cast<int>(util::parse_int(v));
       }},
      {"synthesis.n_features",
       [](ExperimentConfig& c, const std::string& v) {
         c.synthesis.n_features = static_cast<int>(util::parse_int(v));
       }},
      {"synthesis.n_classes",
       [](ExperimentConfig& c, const std::string& v) {
         c.synthesis.n_classes = static_cast<int>(util::parse_int(v));
       }},
      {"synthesis.n_latent_groups",
       [](ExperimentConfig& c, const std::string& v) {
         c.synthesis.n_latent_groups = static_cast<int>(util::parse_int(v));
       }},
      {"synthesis.flip_prob",
       [](ExperimentConfig& c, const std::string& v) {
         c.synthesis.flip_prob = util::parse_double(v);
       }},
      {"mim3.flip_prob",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim3_flip_prob = util::parse_double(v);
       }},
      {"split.member_count",
       [](ExperimentConfig& c, const std::string& v) {
         c.member_count = static_cast<int>(util::parse_int(v));
       }},
      {"split.non_member_count",
       [](ExperimentConfig& c, const std::string& v) {
         c.non_member_count = static_cast<int>(util::parse_int(v));
       }},
      {"split.adv_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.adv_fraction = util::parse_double(v);
       }},
      {"target.hidden_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.target_hidden = parse_int_list(v);
       }},
      {"target.activation",
       [](ExperimentConfig& c, const std::string& v) {
         c.target_activation = nn::parse_activation(v);
       }},
      {"target.learning_rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.target_train.learning_rate = util::parse_double(v);
       }},
      {"target.epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.target_train.epochs = static_cast<int>(util::parse_int(v));
       }},
      {"target.batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.target_train.batch_size = static_cast<int>(util::parse_int(v));
       }},
      {"mim.learning_rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim_train.learning_rate = util::parse_double(v);
       }},
      {"mim.epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim_train.epochs = static_cast<int>(util::parse_int(v));
       }},
      {"mim.batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim_train.batch_size = static_cast<int>(util::parse_int(v));
       }},
      {"substitute.prediction_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.substitute_prediction_layers = parse_int_list(v);
       }},
      {"substitute.label_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.substitute_label_layers = parse_int_list(v);
       }},
      {"substitute.connection_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.substitute_connection_layers = parse_int_list(v);
       }},
      {"mim0.prediction_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim0_prediction_layers = parse_int_list(v);
       }},
      {"mim0.label_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim0_label_layers = parse_int_list(v);
       }},
      {"mim0.connection_layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim0_connection_layers = parse_int_list(v);
       }},
      {"mim1.layers",
       [](ExperimentConfig& c, const std::string& v) {
         c.mim1_layers = parse_int_list(v);
       }},
      {"defense.epsilon",
       [](ExperimentConfig& c, const std::string& v) {
         c.defense.epsilon = util::parse_double(v);
       }},
      {"defense.iterations",
       [](ExperimentConfig& c, const std::string& v) {
         c.defense.iterations = static_cast<int>(util::parse_int(v));
       }},
      {"defense.renormalize",
       [](ExperimentConfig& c, const std::string& v) {
         c.defense.renormalize = parse_bool(v);
       }},
      {"sweep.epsilons",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep_epsilons = parse_double_list(v);
       }},
      {"sweep.classes",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep_classes = parse_int_list(v);
       }},
      {"sweep.adv_fractions",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep_adv_fractions = parse_double_list(v);
       }},
  };
  return table;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_text(std::string_view text,
                                              std::string_view source_name) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(source_name) + ":" +
                        std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError(std::string(source_name) + ":" +
                        std::to_string(line_no) + ": unknown key '" + key +
                        "'");
    }
    try {
      it->second(cfg, value);
    } catch (const Error& e) {
      throw ConfigError(std::string(source_name) + ":" +
                        std::to_string(line_no) + ": field '" + key +
                        "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(
    const std::filesystem::path& path) {
  return parse_text(util::read_file(path), path.string());
}

void ExperimentConfig::validate() const {
  synthesis.validate();
  if (member_count < 1 || non_member_count < 1) {
    throw ConfigError("split sizes must be >= 1");
  }
  if (member_count + non_member_count > synthesis.n_records) {
    throw ConfigError("split sizes exceed synthesis.n_records");
  }
  if (!(adv_fraction > 0.0 && adv_fraction <= 1.0)) {
    throw ConfigError("split.adv_fraction must be in (0, 1]");
  }
  if (target_hidden.empty()) {
    throw ConfigError("target.hidden_layers must be nonempty");
  }
  target_train.validate();
  mim_train.validate();
  defense.validate();
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (diagnostics_sample < 1) {
    throw ConfigError("diagnostics.sample must be >= 1");
  }
  if (!(mim3_flip_prob >= 0.0 && mim3_flip_prob < 0.5)) {
    throw ConfigError("mim3.flip_prob must be in [0, 0.5)");
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(master_seed);
  kv["threads"] = std::to_string(threads);
  kv["diagnostics"] = diagnostics ? "true" : "false";
  kv["diagnostics.sample"] = std::to_string(diagnostics_sample);
  kv["synthesis.n_records"] = std::to_string(synthesis.n_records);
  kv["synthesis.n_features"] = std::to_string(synthesis.n_features);
  kv["synthesis.n_classes"] = std::to_string(synthesis.n_classes);
  kv["synthesis.n_latent_groups"] = std::to_string(synthesis.n_latent_groups);
  kv["synthesis.flip_prob"] = util::format_double(synthesis.flip_prob);
  kv["mim3.flip_prob"] = util::format_double(mim3_flip_prob);
  kv["split.member_count"] = std::to_string(member_count);
  kv["split.non_member_count"] = std::to_string(non_member_count);
  kv["split.adv_fraction"] = util::format_double(adv_fraction);
  kv["target.hidden_layers"] = join_ints(target_hidden);
  kv["target.activation"] = nn::to_string(target_activation);
  kv["target.learning_rate"] = util::format_double(target_train.learning_rate);
  kv["target.epochs"] = std::to_string(target_train.epochs);
  kv["target.batch_size"] = std::to_string(target_train.batch_size);
  kv["mim.learning_rate"] = util::format_double(mim_train.learning_rate);
  kv["mim.epochs"] = std::to_string(mim_train.epochs);
  kv["mim.batch_size"] = std::to_string(mim_train.batch_size);
  kv["substitute.prediction_layers"] = join_ints(substitute_prediction_layers);
  kv["substitute.label_layers"] = join_ints(substitute_label_layers);
  kv["substitute.connection_layers"] = join_ints(substitute_connection_layers);
  kv["mim0.prediction_layers"] = join_ints(mim0_prediction_layers);
  kv["mim0.label_layers"] = join_ints(mim0_label_layers);
  kv["mim0.connection_layers"] = join_ints(mim0_connection_layers);
  kv["mim1.layers"] = join_ints(mim1_layers);
  kv["defense.epsilon"] = util::format_double(defense.epsilon);
  kv["defense.iterations"] = std::to_string(defense.iterations);
  kv["defense.renormalize"] = defense.renormalize ? "true" : "false";
  kv["sweep.epsilons"] = join_doubles(sweep_epsilons);
  kv["sweep.classes"] = join_ints(sweep_classes);
  kv["sweep.adv_fractions"] = join_doubles(sweep_adv_fractions);
  // The output directory is delivery plumbing, not experiment identity; it
  // stays out of the fingerprint so relocated runs still compare.
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string ExperimentConfig::fingerprint() const {
  return util::hex64(rng::fnv1a(canonical_text()));
}

MimVariantConfig ExperimentConfig::mim_variant(MimVariant v) const {
  MimVariantConfig cfg = MimVariantConfig::defaults(v);
  auto apply = [](std::vector<int>& dst, const std::vector<int>& src) {
    if (!src.empty()) dst = src;
  };
  switch (v) {
    case MimVariant::kSubstitute:
      apply(cfg.prediction_layers, substitute_prediction_layers);
      apply(cfg.label_layers, substitute_label_layers);
      apply(cfg.connection_layers, substitute_connection_layers);
      break;
    case MimVariant::kMim1:
      apply(cfg.flat_layers, mim1_layers);
      break;
    case MimVariant::kMim0:
    case MimVariant::kMim2:
    case MimVariant::kMim3:
      apply(cfg.prediction_layers, mim0_prediction_layers);
      apply(cfg.label_layers, mim0_label_layers);
      apply(cfg.connection_layers, mim0_connection_layers);
      break;
  }
  cfg.validate();
  return cfg;
}

nn::DenseNetSpec ExperimentConfig::target_spec() const {
  nn::DenseNetSpec spec;
  spec.layer_sizes.push_back(synthesis.n_features);
  spec.layer_sizes.insert(spec.layer_sizes.end(), target_hidden.begin(),
                          target_hidden.end());
  spec.layer_sizes.push_back(synthesis.n_classes);
  spec.hidden_activation = target_activation;
  spec.output_head = nn::OutputHead::kSoftmax;
  return spec;
}

std::uint64_t ExperimentConfig::seed_for(std::string_view component,
                                         std::uint64_t index) const {
  return rng::derive_seed(master_seed, component, index);
}

}  // namespace aeppt
