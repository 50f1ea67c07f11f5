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

#ifndef AEPPT_ERRORS_HPP
#define AEPPT_ERRORS_HPP

#include <stdexcept>

namespace aeppt {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or vector dimensions do not match.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A collection has the wrong size (empty input, insufficient records, ...).
class SizeError : public Error {
 public:
  using Error::Error;
};

// A value is outside the operation's domain (empty evaluation set, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A network/loss/variant specification violates its invariants.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent configuration (maps to exit status 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A required file is missing or unreadable (maps to exit status 3).
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

// A file exists but cannot be parsed (maps to exit status 3).
class IoError : public Error {
 public:
  using Error::Error;
};

// Numeric failure during an algorithm (maps to exit status 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss; the message names the epoch.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace aeppt

#endif  // AEPPT_ERRORS_HPP
