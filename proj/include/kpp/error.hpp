// Copyright 2026 The Authors.
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

#ifndef KPP_ERROR_HPP_
#define KPP_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace kpp {

// Precondition violations throw std::invalid_argument. The two categories
// below are what callers (the CLI in particular) need to tell apart.

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kpp

#endif  // KPP_ERROR_HPP_
