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

#ifndef AEPPT_CONFIG_HPP
#define AEPPT_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "aeppt/data.hpp"
#include "aeppt/defense.hpp"
#include "aeppt/mim.hpp"
#include "aeppt/nn.hpp"

namespace aeppt {

// Experiment configuration: flat structured text with dotted keys,
// `key = value` per line, `#` comments. One master seed determines every
// downstream stream via hierarchical derivation; the fingerprint is the hash
// of the canonicalized key/value list and is embedded in every output file.
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::string out_dir = "runs/out";
  int threads = 1;
  bool diagnostics = false;
  int diagnostics_sample = 256;

  SynthesisConfig synthesis{/*n_records=*/8000, /*n_features=*/600,
                            /*n_classes=*/100, /*n_latent_groups=*/300,
                            /*flip_prob=*/0.12, /*seed=*/0};
  double mim3_flip_prob = 0.3;  // shifted non-member distribution for mim3

  int member_count = 4000;
  int non_member_count = 4000;
  double adv_fraction = 0.5;

  std::vector<int> target_hidden = {1024, 512, 256};
  nn::Activation target_activation = nn::Activation::kTanh;
  nn::TrainConfig target_train{/*learning_rate=*/0.03, /*epochs=*/100,
                               /*batch_size=*/64, /*seed=*/0};

  nn::TrainConfig mim_train{/*learning_rate=*/0.001, /*epochs=*/100,
                            /*batch_size=*/32, /*seed=*/0};
  // Layer-width overrides (after the input layer); empty = published sizes.
  std::vector<int> substitute_prediction_layers;
  std::vector<int> substitute_label_layers;
  std::vector<int> substitute_connection_layers;
  std::vector<int> mim0_prediction_layers;
  std::vector<int> mim0_label_layers;
  std::vector<int> mim0_connection_layers;
  std::vector<int> mim1_layers;

  DefenseConfig defense{/*epsilon=*/2e-5, /*iterations=*/100, /*seed=*/0,
                        /*renormalize=*/false};

  std::vector<double> sweep_epsilons = {0.0,    5e-6, 1e-5, 1.5e-5,
                                        2e-5, 2.5e-5, 3e-5};
  std::vector<int> sweep_classes = {2, 10, 20, 50, 100};
  std::vector<double> sweep_adv_fractions = {0.25, 0.5, 0.75};

  // Parses; unknown keys and malformed values throw ConfigError naming the
  // line and field.
  static ExperimentConfig parse_text(std::string_view text,
                                     std::string_view source_name = "<config>");
  static ExperimentConfig parse_file(const std::filesystem::path& path);

  void validate() const;

  // Key-sorted `key=value` lines rebuilt from the parsed values; comments and
  // formatting do not affect it.
  std::string canonical_text() const;
  // 16 hex digits of the canonical text's hash.
  std::string fingerprint() const;

  // Variant configuration with any override lists applied.
  MimVariantConfig mim_variant(MimVariant v) const;
  nn::DenseNetSpec target_spec() const;
  // Child seeds, all derived from master_seed.
  std::uint64_t seed_for(std::string_view component,
                         std::uint64_t index = 0) const;
};

}  // namespace aeppt

#endif  // AEPPT_CONFIG_HPP
