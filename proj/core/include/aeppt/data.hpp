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

#ifndef AEPPT_DATA_HPP
#define AEPPT_DATA_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aeppt/errors.hpp"

namespace aeppt {

// One labeled example: binary features stored as 0.0/1.0 and a class index.
struct Record {
  Eigen::VectorXd features;
  int label = 0;
};

// Purchase-style synthetic data: binary feature vectors with latent cluster
// structure. Records copy one of n_latent_groups prototype vectors and then
// flip each bit independently with probability flip_prob.
struct SynthesisConfig {
  int n_records = 0;
  int n_features = 600;
  int n_classes = 100;
  int n_latent_groups = 0;
  double flip_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Prototype bit density; fixed so datasets are reproducible.
inline constexpr double kPrototypeDensity = 0.3;

std::vector<Eigen::VectorXd> synthesize(const SynthesisConfig& cfg);

struct KMeansResult {
  Eigen::MatrixXd centroids;    // one column per cluster
  std::vector<int> assignment;  // nearest-centroid index per point
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding from the seeded stream, squared
// Euclidean distance, nearest-centroid ties broken toward the lowest index.
// Runs until the assignment reaches a fixpoint or max_iters passes. A cluster
// left empty by an update is re-seeded at the point farthest from its
// assigned centroid, so every cluster is nonempty at termination.
KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int k,
                    std::uint64_t seed, int max_iters = 100);

// Labels each vector with its k-means cluster index.
std::vector<Record> cluster_labels(const std::vector<Eigen::VectorXd>& vectors,
                                   int k, std::uint64_t seed);

// The threat-model partition. member/non_member are disjoint record lists;
// the index subsets select the adversary's and the defender's views.
struct DatasetSplit {
  std::vector<Record> member;      // target training data
  std::vector<Record> non_member;  // held out from target training
  std::vector<int> adv_member;     // adversary's indices into member
  std::vector<int> adv_non_member;
  std::vector<int> sub_member;  // defender's indices (everything)
  std::vector<int> sub_non_member;

  // Source indices into the dataset the split was drawn from; bookkeeping
  // for the split file.
  std::vector<int> member_source;
  std::vector<int> non_member_source;

  void validate() const;

  std::vector<Record> records_at(std::span<const int> indices,
                                 bool from_member) const;
  // Complement of the adversary's indices: the held-out evaluation rows.
  std::vector<int> eval_member_indices() const;
  std::vector<int> eval_non_member_indices() const;
};

// Seeded shuffle partitions the records; adversary subsets are sampled
// without replacement with |adv_member| = round(adv_fraction * member_count);
// defender subsets cover everything.
DatasetSplit make_splits(const std::vector<Record>& records, int member_count,
                         int non_member_count, double adv_fraction,
                         std::uint64_t seed);

// Dataset file: `dataset v1 F=<int> K=<int>` then `<label>,<bits>` per line.
void save_dataset(std::ostream& out, std::span<const Record> records,
                  int n_classes);
std::vector<Record> load_dataset(std::istream& in, int* n_classes = nullptr);

// Split file: structured text listing index sets per split name. Annotation
// lines (e.g. the config fingerprint) ride along like checkpoint annotations.
void save_split(std::ostream& out, const DatasetSplit& split,
                std::span<const std::string> annotations = {});
DatasetSplit load_split(std::istream& in, std::span<const Record> records,
                        std::vector<std::string>* annotations = nullptr);

}  // namespace aeppt

#endif  // AEPPT_DATA_HPP
