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

#include <algorithm>
#include <set>
#include <sstream>

#include "aeppt/data.hpp"
#include "doctest.h"

using namespace aeppt;
using Eigen::VectorXd;

TEST_CASE("synthesize: one group, no flips -> identical records") {
  SynthesisConfig cfg{/*n_records=*/50, /*n_features=*/40, /*n_classes=*/1,
                      /*n_latent_groups=*/1, /*flip_prob=*/0.0, /*seed=*/5};
  const auto records = synthesize(cfg);
  REQUIRE(records.size() == 50);
  for (const auto& r : records) {
    CHECK(r == records.front());
    for (int f = 0; f < 40; ++f) {
      CHECK((r[f] == 0.0 || r[f] == 1.0));
    }
  }
}

TEST_CASE("synthesize: within-group distances beat between-group distances") {
  SynthesisConfig cfg{1000, 64, 2, 2, 0.05, 17};
  const auto noisy = synthesize(cfg);
  // Same seed with flip_prob 0 replays the same group draws, which yields
  // each record's ground-truth prototype for attribution.
  SynthesisConfig clean_cfg = cfg;
  clean_cfg.flip_prob = 0.0;
  const auto clean = synthesize(clean_cfg);
  const VectorXd proto0 = [&] {
    SynthesisConfig one = cfg;
    one.n_records = 1;
    one.flip_prob = 0.0;
    return synthesize(one).front();
  }();

  std::vector<int> group(noisy.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    group[i] = (clean[i] == proto0) ? 0 : 1;
  }

  double within = 0, between = 0;
  long within_n = 0, between_n = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    for (std::size_t j = i + 1; j < noisy.size(); ++j) {
      const double hamming = (noisy[i] - noisy[j]).cwiseAbs().sum();
      if (group[i] == group[j]) {
        within += hamming;
        ++within_n;
      } else {
        between += hamming;
        ++between_n;
      }
    }
  }
  REQUIRE(within_n > 0);
  REQUIRE(between_n > 0);
  CHECK(within / within_n < between / between_n);
}

TEST_CASE("synthesize: deterministic in the seed") {
  SynthesisConfig cfg{200, 30, 4, 6, 0.1, 23};
  const auto a = synthesize(cfg);
  const auto b = synthesize(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("kmeans: repeated distinct vectors each claim a cluster") {
  std::vector<VectorXd> points;
  for (int v = 0; v < 3; ++v) {
    VectorXd p = VectorXd::Zero(6);
    p[v] = 1.0;
    p[v + 3] = 1.0;
    for (int copy = 0; copy < 4; ++copy) points.push_back(p);
  }
  const KMeansResult result = kmeans(points, 3, 9);
  // Identical vectors share a label, distinct vectors have distinct labels,
  // and every point sits on its centroid (inertia 0).
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(result.assignment[i] == result.assignment[(i / 4) * 4]);
    CHECK((points[i] - result.centroids.col(result.assignment[i]))
              .squaredNorm() == 0.0);
  }
  std::set<int> labels(result.assignment.begin(), result.assignment.end());
  CHECK(labels.size() == 3);
}

TEST_CASE("kmeans: two separated groups match the exhaustive best partition") {
  // 12 points, 2 clusters; brute force over all 2-partitions is the oracle.
  std::vector<VectorXd> points;
  for (int i = 0; i < 6; ++i) {
    VectorXd a = VectorXd::Zero(4);
    a[0] = 5.0 + 0.1 * i;
    points.push_back(a);
    VectorXd b = VectorXd::Zero(4);
    b[2] = -4.0 - 0.1 * i;
    points.push_back(b);
  }
  auto partition_cost = [&points](unsigned mask) {
    VectorXd sum0 = VectorXd::Zero(4), sum1 = VectorXd::Zero(4);
    int n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (mask & (1u << i)) {
        sum1 += points[i];
        ++n1;
      } else {
        sum0 += points[i];
        ++n0;
      }
    }
    if (n0 == 0 || n1 == 0) return 1e300;
    const VectorXd c0 = sum0 / n0, c1 = sum1 / n1;
    double cost = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      cost += (points[i] - ((mask & (1u << i)) ? c1 : c0)).squaredNorm();
    }
    return cost;
  };
  unsigned best_mask = 1;
  double best_cost = 1e300;
  for (unsigned mask = 1; mask < (1u << 12) - 1; ++mask) {
    const double cost = partition_cost(mask);
    if (cost < best_cost) {
      best_cost = cost;
      best_mask = mask;
    }
  }

  const KMeansResult result = kmeans(points, 2, 33);
  // Agreement up to label permutation.
  bool direct = true, flipped = true;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int oracle = (best_mask & (1u << i)) ? 1 : 0;
    if (result.assignment[i] != oracle) direct = false;
    if (result.assignment[i] != 1 - oracle) flipped = false;
  }
  CHECK((direct || flipped));
}

TEST_CASE("kmeans: deterministic and every point nearest its centroid") {
  SynthesisConfig cfg{300, 24, 5, 8, 0.08, 41};
  const auto vectors = synthesize(cfg);
  const KMeansResult a = kmeans(vectors, 5, 77);
  const KMeansResult b = kmeans(vectors, 5, 77);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
  // Direct scan: assigned centroid is the nearest one (ties lowest index).
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    int best = 0;
    double best_d = (vectors[i] - a.centroids.col(0)).squaredNorm();
    for (int j = 1; j < 5; ++j) {
      const double d = (vectors[i] - a.centroids.col(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    CHECK(a.assignment[i] == best);
  }
}

TEST_CASE("cluster_labels: every class count in the sweep stays nonempty") {
  SynthesisConfig cfg{600, 60, 2, 120, 0.1, 55};
  const auto vectors = synthesize(cfg);
  for (int k : {2, 10, 20, 50, 100}) {
    const auto records = cluster_labels(vectors, k, 91);
    std::set<int> seen;
    for (const auto& r : records) {
      CHECK(r.label >= 0);
      CHECK(r.label < k);
      seen.insert(r.label);
    }
    CHECK(static_cast<int>(seen.size()) == k);
  }
}

TEST_CASE("make_splits: arithmetic, disjointness, and determinism") {
  SynthesisConfig cfg{400, 20, 2, 4, 0.1, 3};
  const auto vectors = synthesize(cfg);
  const auto records = cluster_labels(vectors, 2, 5);

  const DatasetSplit split = make_splits(records, 200, 100, 0.25, 11);
  CHECK(split.member.size() == 200);
  CHECK(split.non_member.size() == 100);
  CHECK(split.adv_member.size() == 50);       // round(0.25 * 200)
  CHECK(split.adv_non_member.size() == 25);   // round(0.25 * 100)
  CHECK(split.sub_member.size() == 200);
  CHECK(split.sub_non_member.size() == 100);

  std::set<int> member_src(split.member_source.begin(),
                           split.member_source.end());
  for (int i : split.non_member_source) CHECK(member_src.count(i) == 0);

  const DatasetSplit again = make_splits(records, 200, 100, 0.25, 11);
  CHECK(again.member_source == split.member_source);
  CHECK(again.adv_member == split.adv_member);

  // Half split on even counts is exact.
  const DatasetSplit half = make_splits(records, 200, 200, 0.5, 13);
  CHECK(half.adv_member.size() == 100);
  CHECK(half.adv_non_member.size() == 100);

  // fraction 1 takes everything.
  const DatasetSplit all = make_splits(records, 150, 100, 1.0, 7);
  CHECK(all.adv_member.size() == 150);
  CHECK(all.eval_member_indices().empty());

  CHECK_THROWS_AS(make_splits(records, 300, 200, 0.5, 1), SizeError);
}

TEST_CASE("dataset and split files round-trip") {
  SynthesisConfig cfg{60, 16, 3, 4, 0.2, 19};
  const auto vectors = synthesize(cfg);
  const auto records = cluster_labels(vectors, 3, 21);

  std::ostringstream data_out;
  save_dataset(data_out, records, 3);
  std::istringstream data_in(data_out.str());
  int k = 0;
  const auto loaded = load_dataset(data_in, &k);
  CHECK(k == 3);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].label == records[i].label);
    CHECK(loaded[i].features == records[i].features);
  }

  const DatasetSplit split = make_splits(records, 30, 20, 0.5, 23);
  std::ostringstream split_out;
  const std::vector<std::string> notes{"fingerprint=deadbeef"};
  save_split(split_out, split, notes);
  std::istringstream split_in(split_out.str());
  std::vector<std::string> loaded_notes;
  const DatasetSplit reloaded = load_split(split_in, records, &loaded_notes);
  CHECK(loaded_notes == notes);
  CHECK(reloaded.member_source == split.member_source);
  CHECK(reloaded.adv_member == split.adv_member);
  CHECK(reloaded.member.size() == split.member.size());
  for (std::size_t i = 0; i < split.member.size(); ++i) {
    CHECK(reloaded.member[i].features == split.member[i].features);
  }

  std::istringstream bad("dataset v2 F=3 K=2\n");
  CHECK_THROWS_AS(load_dataset(bad), IoError);
}
