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

#include "aeppt/util.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "aeppt/errors.hpp"
#include "aeppt/rng.hpp"

namespace aeppt::util {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(std::string_view s) {
  std::string tmp(s);
  if (tmp.empty()) throw IoError("empty numeric field");
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) {
    throw IoError("malformed numeric field: '" + tmp + "'");
  }
  return v;
}

long long parse_int(std::string_view s) {
  std::string tmp(s);
  if (tmp.empty()) throw IoError("empty integer field");
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(tmp.c_str(), &end, 10);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) {
    throw IoError("malformed integer field: '" + tmp + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::string tmp(s);
  if (tmp.empty()) throw IoError("empty integer field");
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(tmp.c_str(), &end, 10);
  if (end != tmp.c_str() + tmp.size() || errno == ERANGE) {
    throw IoError("malformed integer field: '" + tmp + "'");
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingArtifactError("cannot open file: " + path.string());
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open file for writing: " + path.string());
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw IoError("short write: " + path.string());
  }
}

std::string hash_file(const std::filesystem::path& path) {
  return hex64(rng::fnv1a(read_file(path)));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void parallel_chunks(std::size_t n, std::size_t chunk, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk == 0) chunk = n;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  if (threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min<int>(threads, static_cast<int>(n_chunks));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace aeppt::util
