// Copyright (c) the mtlat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MTLAT_ERRORS_H_
#define MTLAT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace mtlat {

// Error taxonomy mirrors the CLI exit codes: ConfigError -> 2, DataError -> 3,
// ContractError -> 4. Anything else escaping to main exits 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape conformance failures name the op and both shapes.
class ShapeError : public ContractError {
 public:
  explicit ShapeError(const std::string& msg) : ContractError(msg) {}
};

}  // namespace mtlat

#endif  // MTLAT_ERRORS_H_
