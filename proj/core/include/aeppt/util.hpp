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

#ifndef AEPPT_UTIL_HPP
#define AEPPT_UTIL_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace aeppt::util {

// Decimal text with 17 significant digits; round-trips IEEE doubles exactly.
std::string format_double(double v);

// Strict double parser; throws IoError on trailing garbage or empty input.
double parse_double(std::string_view s);

// Strict integer parsers.
long long parse_int(std::string_view s);
std::uint64_t parse_u64(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// FNV-1a over a file's bytes, as 16 hex digits. Used for checkpoint hashes.
std::string hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

// Splits [0, n) into contiguous chunks of `chunk` items and runs
// fn(begin, end) for each, fanning out over `threads` workers. Chunk
// boundaries depend only on (n, chunk), never on the thread count, so any
// per-chunk computation is reproducible for every --threads value.
void parallel_chunks(std::size_t n, std::size_t chunk, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace aeppt::util

#endif  // AEPPT_UTIL_HPP
