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

#ifndef KPP_SET_FUNCTION_HPP_
#define KPP_SET_FUNCTION_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "kpp/patch_set.hpp"

namespace kpp {

enum class Orientation { kGain, kCost };

inline const char* to_string(Orientation o) {
  return o == Orientation::kGain ? "gain" : "cost";
}

// A deterministic real-valued function over subsets of {0, ..., n-1}.
class SetFunction {
 public:
  using Evaluator = std::function<double(const PatchSet&)>;

  SetFunction(std::size_t ground_size, Orientation orientation, Evaluator eval,
              std::string name = "set-function")
      : n_(ground_size), orientation_(orientation), eval_(std::move(eval)),
        name_(std::move(name)) {
    if (!eval_) throw std::invalid_argument("SetFunction: empty evaluator");
  }

  std::size_t ground_size() const { return n_; }
  Orientation orientation() const { return orientation_; }
  const std::string& name() const { return name_; }

  double operator()(const PatchSet& s) const {
    if (s.universe() != n_) {
      throw std::invalid_argument("SetFunction " + name_ +
                                  ": subset universe mismatch");
    }
    return eval_(s);
  }

  double evaluate_mask(std::uint64_t mask) const {
    return (*this)(PatchSet::from_mask(n_, mask));
  }

 private:
  std::size_t n_;
  Orientation orientation_;
  Evaluator eval_;
  std::string name_;
};

}  // namespace kpp

#endif  // KPP_SET_FUNCTION_HPP_
