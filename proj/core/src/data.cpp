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

#include "aeppt/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "aeppt/rng.hpp"
#include "aeppt/util.hpp"

namespace aeppt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void SynthesisConfig::validate() const {
  if (n_records < 1) throw SpecError("n_records must be >= 1");
  if (n_features < 1) throw SpecError("n_features must be >= 1");
  if (n_classes < 1) throw SpecError("n_classes must be >= 1");
  if (n_latent_groups < n_classes) {
    throw SpecError("n_latent_groups must be >= n_classes");
  }
  if (!(flip_prob >= 0.0 && flip_prob < 0.5)) {
    throw SpecError("flip_prob must be in [0, 0.5)");
  }
}

std::vector<VectorXd> synthesize(const SynthesisConfig& cfg) {
  cfg.validate();
  rng::Stream stream(cfg.seed);

  // Prototypes first (group-major, bit-major), then the records; the draw
  // order is part of the format so datasets reproduce bit-for-bit.
  std::vector<VectorXd> prototypes(static_cast<std::size_t>(cfg.n_latent_groups));
  for (auto& proto : prototypes) {
    proto.resize(cfg.n_features);
    for (int f = 0; f < cfg.n_features; ++f) {
      proto[f] = stream.next() < kPrototypeDensity ? 1.0 : 0.0;
    }
  }

  std::vector<VectorXd> records(static_cast<std::size_t>(cfg.n_records));
  for (auto& rec : records) {
    const auto g = static_cast<std::size_t>(
        stream.below(static_cast<std::uint64_t>(cfg.n_latent_groups)));
    rec = prototypes[g];
    for (int f = 0; f < cfg.n_features; ++f) {
      if (stream.next() < cfg.flip_prob) rec[f] = 1.0 - rec[f];
    }
  }
  return records;
}

namespace {

// Nearest centroid per point, ties toward the lowest index. Distances via
// ||x||^2 - 2 x.c + ||c||^2; the constant ||x||^2 does not affect the argmin.
std::vector<int> assign_nearest(const MatrixXd& points,
                                const MatrixXd& centroids) {
  const Eigen::Index n = points.cols();
  const Eigen::Index k = centroids.cols();
  MatrixXd cross = centroids.transpose() * points;  // k x n
  VectorXd c_norms = centroids.colwise().squaredNorm();
  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_score = c_norms[0] - 2.0 * cross(0, i);
    for (Eigen::Index j = 1; j < k; ++j) {
      const double score = c_norms[j] - 2.0 * cross(j, i);
      if (score < best_score) {
        best_score = score;
        best = static_cast<int>(j);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best;
  }
  return assignment;
}

}  // namespace

KMeansResult kmeans(const std::vector<VectorXd>& points, int k,
                    std::uint64_t seed, int max_iters) {
  if (k < 1) throw SpecError("k must be >= 1");
  if (points.empty()) throw SizeError("kmeans needs at least one point");
  const Eigen::Index dim = points.front().size();
  const std::size_t n = points.size();
  {
    std::set<std::vector<double>> distinct;
    for (const auto& p : points) {
      if (p.size() != dim) throw ShapeError("inconsistent point dimensions");
      distinct.insert(std::vector<double>(p.data(), p.data() + p.size()));
      if (distinct.size() >= static_cast<std::size_t>(k)) break;
    }
    if (distinct.size() < static_cast<std::size_t>(k)) {
      throw SizeError("kmeans needs at least k distinct points");
    }
  }

  MatrixXd pts(dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    pts.col(static_cast<Eigen::Index>(i)) = points[i];
  }

  rng::Stream stream(seed);
  MatrixXd centroids(dim, k);

  // k-means++ seeding: first centroid uniform, then D^2-weighted draws.
  centroids.col(0) = pts.col(static_cast<Eigen::Index>(stream.below(n)));
  VectorXd d2 =
      (pts.colwise() - centroids.col(0)).colwise().squaredNorm().transpose();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(stream.below(n));
    } else {
      const double r = stream.next() * total;
      double cum = 0.0;
      pick = static_cast<Eigen::Index>(n) - 1;
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        cum += d2[i];
        if (r < cum) {
          pick = i;
          break;
        }
      }
    }
    centroids.col(j) = pts.col(pick);
    d2 = d2.cwiseMin(
        (pts.colwise() - centroids.col(j)).colwise().squaredNorm().transpose());
  }

  std::vector<int> assignment;
  std::vector<int> previous;
  int iterations = 0;
  for (int iter = 0; iter < max_iters; ++iter) {
    iterations = iter + 1;
    assignment = assign_nearest(pts, centroids);
    if (assignment == previous) break;

    // Update step: cluster means.
    MatrixXd sums = MatrixXd::Zero(dim, k);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.col(assignment[i]) += pts.col(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(assignment[i])];
    }
    VectorXd dist_to_own(static_cast<Eigen::Index>(n));
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        centroids.col(j) =
            sums.col(j) / counts[static_cast<std::size_t>(j)];
      }
    }
    // Empty-cluster rule: re-seed at the point farthest from its assigned
    // centroid, taking successive farthest points for multiple empties.
    bool any_empty = false;
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] == 0) {
        any_empty = true;
        break;
      }
    }
    if (any_empty) {
      for (std::size_t i = 0; i < n; ++i) {
        dist_to_own[static_cast<Eigen::Index>(i)] =
            (pts.col(static_cast<Eigen::Index>(i)) -
             centroids.col(assignment[i]))
                .squaredNorm();
      }
      for (int j = 0; j < k; ++j) {
        if (counts[static_cast<std::size_t>(j)] != 0) continue;
        Eigen::Index farthest;
        dist_to_own.maxCoeff(&farthest);
        centroids.col(j) = pts.col(farthest);
        dist_to_own[farthest] = -1.0;  // claimed; exclude from later empties
      }
    }
    previous = assignment;
  }
  // The update above may have moved centroids after the last assignment;
  // one final pass keeps the invariant "every point sits with its nearest
  // centroid at termination". At a fixpoint it recomputes the same labels.
  assignment = assign_nearest(pts, centroids);

  return KMeansResult{std::move(centroids), std::move(assignment), iterations};
}

std::vector<Record> cluster_labels(const std::vector<VectorXd>& vectors,
                                   int k, std::uint64_t seed) {
  KMeansResult result = kmeans(vectors, k, seed);
  std::vector<Record> records;
  records.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    records.push_back(Record{vectors[i], result.assignment[i]});
  }
  return records;
}

void DatasetSplit::validate() const {
  auto check_subset = [](std::span<const int> subset, std::size_t limit,
                         const char* name) {
    for (int i : subset) {
      if (i < 0 || static_cast<std::size_t>(i) >= limit) {
        throw SizeError(std::string("split subset out of range: ") + name);
      }
    }
  };
  check_subset(adv_member, member.size(), "adv_member");
  check_subset(adv_non_member, non_member.size(), "adv_non_member");
  check_subset(sub_member, member.size(), "sub_member");
  check_subset(sub_non_member, non_member.size(), "sub_non_member");
  if (sub_member.size() != member.size() ||
      sub_non_member.size() != non_member.size()) {
    throw SizeError("defender subsets must cover every record");
  }
}

std::vector<Record> DatasetSplit::records_at(std::span<const int> indices,
                                             bool from_member) const {
  const auto& source = from_member ? member : non_member;
  std::vector<Record> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(source[static_cast<std::size_t>(i)]);
  return out;
}

namespace {

std::vector<int> complement_indices(std::span<const int> subset,
                                    std::size_t total) {
  std::vector<char> taken(total, 0);
  for (int i : subset) taken[static_cast<std::size_t>(i)] = 1;
  std::vector<int> out;
  out.reserve(total - subset.size());
  for (std::size_t i = 0; i < total; ++i) {
    if (!taken[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

std::vector<int> DatasetSplit::eval_member_indices() const {
  return complement_indices(adv_member, member.size());
}

std::vector<int> DatasetSplit::eval_non_member_indices() const {
  return complement_indices(adv_non_member, non_member.size());
}

DatasetSplit make_splits(const std::vector<Record>& records, int member_count,
                         int non_member_count, double adv_fraction,
                         std::uint64_t seed) {
  if (member_count < 1 || non_member_count < 1) {
    throw SizeError("member and non-member counts must be >= 1");
  }
  if (static_cast<std::size_t>(member_count) +
          static_cast<std::size_t>(non_member_count) >
      records.size()) {
    throw SizeError("not enough records for the requested split sizes");
  }
  if (!(adv_fraction > 0.0 && adv_fraction <= 1.0)) {
    throw SpecError("adv_fraction must be in (0, 1]");
  }

  rng::Stream stream(seed);
  std::vector<int> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  stream.shuffle(order);

  DatasetSplit split;
  split.member_source.assign(order.begin(), order.begin() + member_count);
  split.non_member_source.assign(order.begin() + member_count,
                                 order.begin() + member_count +
                                     non_member_count);
  for (int i : split.member_source) {
    split.member.push_back(records[static_cast<std::size_t>(i)]);
  }
  for (int i : split.non_member_source) {
    split.non_member.push_back(records[static_cast<std::size_t>(i)]);
  }

  auto sample_without_replacement = [&stream](int total, double fraction) {
    const int take = static_cast<int>(std::llround(fraction * total));
    std::vector<int> idx(static_cast<std::size_t>(total));
    std::iota(idx.begin(), idx.end(), 0);
    stream.shuffle(idx);
    idx.resize(static_cast<std::size_t>(take));
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  split.adv_member = sample_without_replacement(member_count, adv_fraction);
  split.adv_non_member =
      sample_without_replacement(non_member_count, adv_fraction);

  split.sub_member.resize(static_cast<std::size_t>(member_count));
  std::iota(split.sub_member.begin(), split.sub_member.end(), 0);
  split.sub_non_member.resize(static_cast<std::size_t>(non_member_count));
  std::iota(split.sub_non_member.begin(), split.sub_non_member.end(), 0);

  split.validate();
  return split;
}

// ---------------------------------------------------------------------------
// File formats

void save_dataset(std::ostream& out, std::span<const Record> records,
                  int n_classes) {
  if (records.empty()) throw SizeError("cannot save an empty dataset");
  const Eigen::Index f = records.front().features.size();
  out << "dataset v1 F=" << f << " K=" << n_classes << '\n';
  std::string bits(static_cast<std::size_t>(f), '0');
  for (const auto& rec : records) {
    if (rec.features.size() != f) {
      throw ShapeError("inconsistent feature widths in dataset");
    }
    for (Eigen::Index i = 0; i < f; ++i) {
      bits[static_cast<std::size_t>(i)] = rec.features[i] != 0.0 ? '1' : '0';
    }
    out << rec.label << ',' << bits << '\n';
  }
}

std::vector<Record> load_dataset(std::istream& in, int* n_classes) {
  std::string header;
  if (!std::getline(in, header)) throw IoError("empty dataset file");
  std::istringstream hs(header);
  std::string magic, version, f_field, k_field;
  hs >> magic >> version >> f_field >> k_field;
  if (magic != "dataset" || version != "v1" ||
      f_field.rfind("F=", 0) != 0 || k_field.rfind("K=", 0) != 0) {
    throw IoError("malformed dataset header: '" + header + "'");
  }
  const long long f = util::parse_int(f_field.substr(2));
  const long long k = util::parse_int(k_field.substr(2));
  if (n_classes) *n_classes = static_cast<int>(k);

  std::vector<Record> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw IoError("dataset row missing ',': '" + line + "'");
    }
    Record rec;
    rec.label = static_cast<int>(util::parse_int(line.substr(0, comma)));
    if (rec.label < 0 || rec.label >= k) {
      throw IoError("dataset label out of range: " + std::to_string(rec.label));
    }
    const std::string_view bits = std::string_view(line).substr(comma + 1);
    if (static_cast<long long>(bits.size()) != f) {
      throw IoError("dataset row has wrong feature width");
    }
    rec.features.resize(f);
    for (long long i = 0; i < f; ++i) {
      const char c = bits[static_cast<std::size_t>(i)];
      if (c != '0' && c != '1') throw IoError("dataset bit must be 0 or 1");
      rec.features[i] = c == '1' ? 1.0 : 0.0;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw IoError("dataset file has no records");
  return records;
}

namespace {

void write_index_set(std::ostream& out, const char* name,
                     std::span<const int> indices) {
  out << name << ' ' << indices.size() << ':';
  for (int i : indices) out << ' ' << i;
  out << '\n';
}

std::vector<int> read_index_set(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("split file truncated before '" + name + "'");
  }
  std::istringstream ss(line);
  std::string got_name, count_tok;
  ss >> got_name >> count_tok;
  if (got_name != name || count_tok.empty() || count_tok.back() != ':') {
    throw IoError("malformed split line, expected '" + name + " <n>:'");
  }
  const long long count = util::parse_int(
      std::string_view(count_tok).substr(0, count_tok.size() - 1));
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  long long v = 0;
  while (ss >> v) out.push_back(static_cast<int>(v));
  if (static_cast<long long>(out.size()) != count) {
    throw IoError("split set '" + name + "' has wrong element count");
  }
  return out;
}

}  // namespace

void save_split(std::ostream& out, const DatasetSplit& split,
                std::span<const std::string> annotations) {
  out << "split v1\n";
  out << "annotations " << annotations.size() << '\n';
  for (const auto& a : annotations) out << a << '\n';
  write_index_set(out, "member", split.member_source);
  write_index_set(out, "non_member", split.non_member_source);
  write_index_set(out, "adv_member", split.adv_member);
  write_index_set(out, "adv_non_member", split.adv_non_member);
  write_index_set(out, "sub_member", split.sub_member);
  write_index_set(out, "sub_non_member", split.sub_non_member);
  out << "end split\n";
}

DatasetSplit load_split(std::istream& in, std::span<const Record> records,
                        std::vector<std::string>* annotations) {
  std::string line;
  if (!std::getline(in, line) || line != "split v1") {
    throw IoError("malformed split header");
  }
  if (!std::getline(in, line) || line.rfind("annotations ", 0) != 0) {
    throw IoError("malformed split annotations line");
  }
  const long long ann_count = util::parse_int(line.substr(12));
  for (long long i = 0; i < ann_count; ++i) {
    if (!std::getline(in, line)) throw IoError("split file truncated");
    if (annotations) annotations->push_back(line);
  }
  DatasetSplit split;
  split.member_source = read_index_set(in, "member");
  split.non_member_source = read_index_set(in, "non_member");
  split.adv_member = read_index_set(in, "adv_member");
  split.adv_non_member = read_index_set(in, "adv_non_member");
  split.sub_member = read_index_set(in, "sub_member");
  split.sub_non_member = read_index_set(in, "sub_non_member");
  if (!std::getline(in, line) || line != "end split") {
    throw IoError("malformed split trailer");
  }
  for (int i : split.member_source) {
    if (i < 0 || static_cast<std::size_t>(i) >= records.size()) {
      throw IoError("split member index out of dataset range");
    }
    split.member.push_back(records[static_cast<std::size_t>(i)]);
  }
  for (int i : split.non_member_source) {
    if (i < 0 || static_cast<std::size_t>(i) >= records.size()) {
      throw IoError("split non-member index out of dataset range");
    }
    split.non_member.push_back(records[static_cast<std::size_t>(i)]);
  }
  split.validate();
  return split;
}

}  // namespace aeppt
