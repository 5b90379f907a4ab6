// Copyright 2026 The DNA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DNA_ERRORS_HPP_
#define DNA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dna {

/// Tensor/layer dimensions do not conform to a primitive's signature.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

/// An API precondition was violated (wrong phase, step before backward, ...).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

/// A value is outside its documented domain (e.g. magnitude outside [0,1]).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error("domain error: " + msg) {}
};

/// Malformed on-disk data (dataset records, checkpoints, configs).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

}  // namespace dna

#endif  // DNA_ERRORS_HPP_
