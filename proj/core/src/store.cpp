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

#include "aeppt/store.hpp"

#include <ostream>
#include <sstream>

#include "aeppt/util.hpp"

namespace aeppt {

std::vector<EvalExample> PredictionStore::eval_examples(bool members,
                                                        bool defended) const {
  const auto& rows = members ? eval_member : eval_non_member;
  std::vector<EvalExample> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    out.push_back(EvalExample{row.label, row.membership,
                              defended ? row.defended : row.original,
                              defended ? row.l1 : 0.0});
  }
  return out;
}

namespace {

void write_vector(std::ostream& out, const PredictionVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << util::format_double(v[i]);
  }
}

void write_examples(std::ostream& out, const char* name,
                    std::span<const DefendedExample> rows) {
  out << "set " << name << ' ' << rows.size() << '\n';
  for (const auto& row : rows) {
    out << row.label << ' ' << row.membership << ' '
        << util::format_double(row.l1) << " | ";
    write_vector(out, row.original);
    out << " | ";
    write_vector(out, row.defended);
    out << '\n';
  }
}

std::vector<DefendedExample> read_examples(std::istream& in,
                                           const std::string& name, int k) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("store truncated before " + name);
  std::istringstream hs(line);
  std::string tag, got;
  std::size_t count = 0;
  hs >> tag >> got >> count;
  if (tag != "set" || got != name || hs.fail()) {
    throw IoError("malformed store set header: '" + line + "'");
  }
  std::vector<DefendedExample> rows;
  rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw IoError("store row truncated");
    std::istringstream ss(line);
    DefendedExample row;
    std::string sep;
    double l1 = 0.0;
    ss >> row.label >> row.membership >> l1 >> sep;
    if (ss.fail() || sep != "|") throw IoError("malformed store row");
    row.l1 = l1;
    row.original.resize(k);
    for (int j = 0; j < k; ++j) ss >> row.original[j];
    ss >> sep;
    if (ss.fail() || sep != "|") throw IoError("malformed store row");
    row.defended.resize(k);
    for (int j = 0; j < k; ++j) ss >> row.defended[j];
    if (ss.fail()) throw IoError("malformed store row");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void save_store(std::ostream& out, const PredictionStore& store) {
  int k = 0;
  for (const auto* rows :
       {&store.adv_member, &store.adv_non_member, &store.eval_member,
        &store.eval_non_member}) {
    if (!rows->empty()) {
      k = static_cast<int>(rows->front().original.size());
      break;
    }
  }
  out << "prediction_store v1\n";
  out << "fingerprint=" << store.fingerprint << '\n';
  out << "epsilon=" << util::format_double(store.epsilon) << '\n';
  out << "iterations=" << store.iterations << '\n';
  out << "seed=" << store.seed << '\n';
  out << "substitute_hash=" << store.substitute_hash << '\n';
  out << "classes=" << k << '\n';
  write_examples(out, "adv_member", store.adv_member);
  write_examples(out, "adv_non_member", store.adv_non_member);
  write_examples(out, "eval_member", store.eval_member);
  write_examples(out, "eval_non_member", store.eval_non_member);
  out << "end prediction_store\n";
}

PredictionStore load_store(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "prediction_store v1") {
    throw IoError("malformed prediction store header");
  }
  auto field = [&](const char* key) {
    if (!std::getline(in, line)) {
      throw IoError(std::string("store truncated at ") + key);
    }
    const std::string k = std::string(key) + "=";
    if (line.rfind(k, 0) != 0) {
      throw IoError("store: expected '" + k + "...', got '" + line + "'");
    }
    return line.substr(k.size());
  };
  PredictionStore store;
  store.fingerprint = field("fingerprint");
  store.epsilon = util::parse_double(field("epsilon"));
  store.iterations = static_cast<int>(util::parse_int(field("iterations")));
  store.seed = util::parse_u64(field("seed"));
  store.substitute_hash = field("substitute_hash");
  const int k = static_cast<int>(util::parse_int(field("classes")));
  store.adv_member = read_examples(in, "adv_member", k);
  store.adv_non_member = read_examples(in, "adv_non_member", k);
  store.eval_member = read_examples(in, "eval_member", k);
  store.eval_non_member = read_examples(in, "eval_non_member", k);
  if (!std::getline(in, line) || line != "end prediction_store") {
    throw IoError("malformed prediction store trailer");
  }
  return store;
}

void save_store_file(const std::filesystem::path& path,
                     const PredictionStore& store) {
  std::ostringstream out;
  save_store(out, store);
  util::write_file(path, out.str());
}

PredictionStore load_store_file(const std::filesystem::path& path) {
  std::istringstream in(util::read_file(path));
  return load_store(in);
}

}  // namespace aeppt
