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

#ifndef KPP_PATCH_SET_HPP_
#define KPP_PATCH_SET_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpp/patch_grid.hpp"

namespace kpp {

// Distinct patch indices in insertion order, with an O(1) membership bitmap.
class PatchSet {
 public:
  PatchSet() = default;
  explicit PatchSet(std::size_t n_patches) : member_(n_patches, false) {}

  PatchSet(std::size_t n_patches, std::initializer_list<PatchIndex> indices)
      : PatchSet(n_patches) {
    for (PatchIndex i : indices) insert(i);
  }

  static PatchSet from_indices(std::size_t n_patches,
                               const std::vector<PatchIndex>& indices) {
    PatchSet s(n_patches);
    for (PatchIndex i : indices) s.insert(i);
    return s;
  }

  static PatchSet full(std::size_t n_patches) {
    PatchSet s(n_patches);
    for (PatchIndex i = 0; i < n_patches; ++i) s.insert(i);
    return s;
  }

  // Bit i of mask selects element i; ground sets up to 64.
  static PatchSet from_mask(std::size_t n_patches, std::uint64_t mask) {
    PatchSet s(n_patches);
    for (PatchIndex i = 0; i < n_patches; ++i) {
      if (mask >> i & 1U) s.insert(i);
    }
    return s;
  }

  void insert(PatchIndex idx) {
    if (idx >= member_.size()) {
      throw std::invalid_argument("PatchSet: index " + std::to_string(idx) +
                                  " out of range [0," +
                                  std::to_string(member_.size()) + ")");
    }
    if (member_[idx]) {
      throw std::invalid_argument("PatchSet: duplicate index " +
                                  std::to_string(idx));
    }
    member_[idx] = true;
    order_.push_back(idx);
  }

  bool contains(PatchIndex idx) const {
    return idx < member_.size() && member_[idx];
  }

  PatchSet with(PatchIndex idx) const {
    PatchSet s = *this;
    s.insert(idx);
    return s;
  }

  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }
  std::size_t universe() const { return member_.size(); }

  const std::vector<PatchIndex>& indices() const { return order_; }

  std::vector<PatchIndex> sorted() const {
    std::vector<PatchIndex> s = order_;
    std::sort(s.begin(), s.end());
    return s;
  }

  std::uint64_t mask() const {
    std::uint64_t m = 0;
    for (PatchIndex i : order_) m |= std::uint64_t{1} << i;
    return m;
  }

  std::vector<PatchIndex> complement() const {
    std::vector<PatchIndex> out;
    for (PatchIndex i = 0; i < member_.size(); ++i) {
      if (!member_[i]) out.push_back(i);
    }
    return out;
  }

  // Same members, regardless of insertion order.
  bool same_members(const PatchSet& other) const {
    return member_ == other.member_;
  }

  friend bool operator==(const PatchSet&, const PatchSet&) = default;

 private:
  std::vector<bool> member_;
  std::vector<PatchIndex> order_;
};

}  // namespace kpp

#endif  // KPP_PATCH_SET_HPP_
