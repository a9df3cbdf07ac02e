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

// Empirical checks of diminishing returns and of the greedy approximation
// guarantee, on synthetic fixtures and on image-derived gain functions.

#ifndef KPP_SUBMODULAR_LAB_HPP_
#define KPP_SUBMODULAR_LAB_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpp/oracle.hpp"
#include "kpp/patch_set.hpp"
#include "kpp/selector.hpp"
#include "kpp/set_function.hpp"

namespace kpp::lab {

inline constexpr std::size_t kExhaustiveLimit = 12;
inline constexpr std::size_t kBruteForceLimit = 20;
inline constexpr double kDefaultTolerance = 1e-9;
inline const double kGreedyBound = 1.0 - 1.0 / std::exp(1.0);

struct CheckMode {
  enum class Kind { kExhaustive, kSampled };
  Kind kind = Kind::kExhaustive;
  std::size_t trials = 0;
  std::uint64_t seed = 0;

  static CheckMode exhaustive() { return {}; }
  static CheckMode sampled(std::size_t trials, std::uint64_t seed) {
    return {Kind::kSampled, trials, seed};
  }
};

// X ⊆ Y, x ∉ Y with f(Y∪{x}) − f(Y) exceeding f(X∪{x}) − f(X).
struct ViolationRecord {
  std::vector<PatchIndex> x_set;
  std::vector<PatchIndex> y_set;
  PatchIndex element = 0;
  double lhs = 0.0;  // f(X∪{x}) − f(X)
  double rhs = 0.0;  // f(Y∪{x}) − f(Y)
  double deficit = 0.0;
};

struct MonotoneViolation {
  std::vector<PatchIndex> x_set;
  PatchIndex element = 0;
  double before = 0.0;
  double after = 0.0;
};

struct CheckStats {
  std::size_t triples = 0;
  double max_deficit = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::vector<PatchIndex> mask_members(std::uint64_t mask) {
  std::vector<PatchIndex> out;
  for (PatchIndex i = 0; mask != 0; ++i, mask >>= 1) {
    if (mask & 1U) out.push_back(i);
  }
  return out;
}

// f on every subset, indexed by bitmask.
inline std::vector<double> tabulate(const SetFunction& f) {
  const std::size_t n = f.ground_size();
  std::vector<double> table(std::size_t{1} << n);
  for (std::uint64_t m = 0; m < table.size(); ++m) table[m] = f.evaluate_mask(m);
  return table;
}

inline void require_exhaustive(const SetFunction& f) {
  if (f.ground_size() > kExhaustiveLimit) {
    throw std::invalid_argument("exhaustive check limited to n <= " +
                                std::to_string(kExhaustiveLimit) + ", got " +
                                std::to_string(f.ground_size()));
  }
}

}  // namespace detail

// Violations in lexicographic (Y mask, X mask, x) order. stats, if given,
// receives the triple count and the largest deficit seen.
inline std::vector<ViolationRecord> check_diminishing_returns(
    const SetFunction& f, const CheckMode& mode,
    double tolerance = kDefaultTolerance, CheckStats* stats = nullptr) {
  const std::size_t n = f.ground_size();
  std::vector<ViolationRecord> out;
  CheckStats local;
  auto consider = [&](std::uint64_t xm, std::uint64_t ym, PatchIndex e,
                      double fx, double fxe, double fy, double fye) {
    ++local.triples;
    const double lhs = fxe - fx;
    const double rhs = fye - fy;
    const double deficit = rhs - lhs;
    local.max_deficit = std::max(local.max_deficit, deficit);
    if (deficit > tolerance) {
      out.push_back({detail::mask_members(xm), detail::mask_members(ym), e, lhs,
                     rhs, deficit});
    }
  };

  if (mode.kind == CheckMode::Kind::kExhaustive) {
    detail::require_exhaustive(f);
    const auto table = detail::tabulate(f);
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t y = 0; y <= full; ++y) {
      // Submasks of y in increasing order.
      std::vector<std::uint64_t> subs;
      for (std::uint64_t s = y;; s = (s - 1) & y) {
        subs.push_back(s);
        if (s == 0) break;
      }
      std::reverse(subs.begin(), subs.end());
      for (std::uint64_t x : subs) {
        for (PatchIndex e = 0; e < n; ++e) {
          const std::uint64_t bit = std::uint64_t{1} << e;
          if (y & bit) continue;
          consider(x, y, e, table[x], table[x | bit], table[y], table[y | bit]);
        }
      }
    }
  } else {
    if (mode.trials < 1) throw std::invalid_argument("sampled check needs trials >= 1");
    std::mt19937_64 rng(mode.seed);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t t = 0; t < mode.trials; ++t) {
      PatchSet y(n);
      std::vector<PatchIndex> outside;
      for (PatchIndex i = 0; i < n; ++i) {
        if (coin(rng)) y.insert(i); else outside.push_back(i);
      }
      if (outside.empty()) continue;
      PatchSet x(n);
      for (PatchIndex i : y.indices()) {
        if (coin(rng)) x.insert(i);
      }
      std::uniform_int_distribution<std::size_t> pick(0, outside.size() - 1);
      const PatchIndex e = outside[pick(rng)];
      const double fx = f(x), fxe = f(x.with(e)), fy = f(y), fye = f(y.with(e));
      ++local.triples;
      const double lhs = fxe - fx, rhs = fye - fy;
      local.max_deficit = std::max(local.max_deficit, rhs - lhs);
      if (rhs - lhs > tolerance) {
        out.push_back({x.sorted(), y.sorted(), e, lhs, rhs, rhs - lhs});
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

// Pairs X ⊂ X∪{x} where the value drops by more than tolerance.
inline std::vector<MonotoneViolation> check_monotone(
    const SetFunction& f, const CheckMode& mode,
    double tolerance = kDefaultTolerance) {
  const std::size_t n = f.ground_size();
  std::vector<MonotoneViolation> out;
  if (mode.kind == CheckMode::Kind::kExhaustive) {
    detail::require_exhaustive(f);
    const auto table = detail::tabulate(f);
    for (std::uint64_t x = 0; x < table.size(); ++x) {
      for (PatchIndex e = 0; e < n; ++e) {
        const std::uint64_t bit = std::uint64_t{1} << e;
        if (x & bit) continue;
        if (table[x | bit] < table[x] - tolerance) {
          out.push_back({detail::mask_members(x), e, table[x], table[x | bit]});
        }
      }
    }
  } else {
    if (mode.trials < 1) throw std::invalid_argument("sampled check needs trials >= 1");
    std::mt19937_64 rng(mode.seed);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t t = 0; t < mode.trials; ++t) {
      PatchSet x(n);
      std::vector<PatchIndex> outside;
      for (PatchIndex i = 0; i < n; ++i) {
        if (coin(rng)) x.insert(i); else outside.push_back(i);
      }
      if (outside.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, outside.size() - 1);
      const PatchIndex e = outside[pick(rng)];
      const double before = f(x), after = f(x.with(e));
      if (after < before - tolerance) out.push_back({x.sorted(), e, before, after});
    }
  }
  return out;
}

struct SubsetValue {
  std::vector<PatchIndex> subset;  // sorted
  double value = 0.0;
};

inline SubsetValue greedy_maximize(const SetFunction& f, std::size_t k) {
  if (f.orientation() != Orientation::kGain) {
    throw std::invalid_argument("greedy_maximize needs a gain-oriented function");
  }
  if (k < 1 || k > f.ground_size()) throw std::invalid_argument("k out of range");
  const SelectionTrace trace = kpp_greedy(f, k);
  return {trace.selected.sorted(), f(trace.selected)};
}

// Exact optimum over all k-subsets; ties go to the lexicographically
// smallest subset.
inline SubsetValue brute_force_optimum(const SetFunction& f, std::size_t k) {
  const std::size_t n = f.ground_size();
  if (n > kBruteForceLimit) {
    throw std::invalid_argument("brute force limited to n <= " +
                                std::to_string(kBruteForceLimit));
  }
  if (k < 1 || k > n) throw std::invalid_argument("k out of range");
  const bool maximize = f.orientation() == Orientation::kGain;
  std::vector<PatchIndex> combo(k);
  for (std::size_t i = 0; i < k; ++i) combo[i] = i;
  SubsetValue best;
  bool have = false;
  while (true) {
    const double v = f(PatchSet::from_indices(n, combo));
    if (!have || (maximize ? v > best.value : v < best.value)) {
      best = {combo, v};
      have = true;
    }
    // next combination in lexicographic order
    std::size_t i = k;
    while (i > 0 && combo[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
  }
  return best;
}

struct BoundReport {
  double greedy_value = 0.0;
  double optimum_value = 0.0;
  double ratio = 1.0;
  double threshold = kGreedyBound;

  bool meets_bound() const { return ratio >= threshold; }
};

inline BoundReport bound_ratio(const SetFunction& f, std::size_t k) {
  BoundReport r;
  r.greedy_value = greedy_maximize(f, k).value;
  r.optimum_value = brute_force_optimum(f, k).value;
  r.ratio = r.optimum_value == 0.0 ? 1.0 : r.greedy_value / r.optimum_value;
  return r;
}

// f(S) = |∪_{i∈S} sets[i]|.
inline SetFunction make_coverage_function(std::vector<std::vector<int>> sets) {
  if (sets.empty()) throw std::invalid_argument("coverage: no sets");
  const std::size_t n = sets.size();
  auto shared = std::make_shared<std::vector<std::vector<int>>>(std::move(sets));
  return SetFunction(
      n, Orientation::kGain,
      [shared](const PatchSet& s) {
        std::set<int> covered;
        for (PatchIndex i : s.indices()) {
          covered.insert((*shared)[i].begin(), (*shared)[i].end());
        }
        return static_cast<double>(covered.size());
      },
      "coverage");
}

inline SetFunction make_modular(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("modular: no weights");
  const std::size_t n = weights.size();
  return SetFunction(
      n, Orientation::kGain,
      [w = std::move(weights)](const PatchSet& s) {
        double total = 0.0;
        for (PatchIndex i : s.sorted()) total += w[i];
        return total;
      },
      "modular");
}

// f(S) = |S|², supermodular.
inline SetFunction make_supermodular_square(std::size_t n = 3) {
  if (n == 0) throw std::invalid_argument("square: empty ground set");
  return SetFunction(
      n, Orientation::kGain,
      [](const PatchSet& s) {
        const double k = static_cast<double>(s.size());
        return k * k;
      },
      "square");
}

// Random coverage instance: each of n sets draws 1..max_set_size elements
// from a universe of the given size.
inline SetFunction make_random_coverage(std::size_t n, std::size_t universe,
                                        std::size_t max_set_size,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(1, max_set_size);
  std::uniform_int_distribution<int> elem(0, static_cast<int>(universe) - 1);
  std::vector<std::vector<int>> sets(n);
  for (auto& s : sets) {
    const std::size_t m = size_dist(rng);
    for (std::size_t j = 0; j < m; ++j) s.push_back(elem(rng));
  }
  return make_coverage_function(std::move(sets));
}

// g(X) = f(∅) − f(X) with f the full-image MSE; f(∅) is the zero
// prediction's error, so g(∅) = 0.
inline SetFunction gain_from_image(std::shared_ptr<const Oracle> oracle,
                                   std::shared_ptr<const PatchArray> patches) {
  const double empty_error = zero_prediction_mse(*patches);
  const std::size_t n = patches->n_patches();
  return SetFunction(
      n, Orientation::kGain,
      [oracle, patches, empty_error](const PatchSet& x) {
        if (x.empty()) return 0.0;
        const Reconstruction r = oracle->reconstruct(*patches, x);
        return empty_error - full_mse(r, *patches);
      },
      "image-gain:" + oracle->id());
}

inline std::string format_subset(const std::vector<PatchIndex>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(s[i]);
  }
  return out;
}

// CSV: X,Y,x,lhs,rhs,deficit; subsets as ';'-joined indices.
inline void write_violations_csv(std::ostream& os,
                                 const std::vector<ViolationRecord>& records) {
  os << "X,Y,x,lhs,rhs,deficit\n";
  os.precision(17);
  for (const auto& r : records) {
    os << format_subset(r.x_set) << ',' << format_subset(r.y_set) << ','
       << r.element << ',' << r.lhs << ',' << r.rhs << ',' << r.deficit << '\n';
  }
}

// CSV: greedy_value,optimum_value,ratio,threshold
inline void write_bound_csv(std::ostream& os,
                            const std::vector<BoundReport>& reports) {
  os << "greedy_value,optimum_value,ratio,threshold\n";
  os.precision(17);
  for (const auto& r : reports) {
    os << r.greedy_value << ',' << r.optimum_value << ',' << r.ratio << ','
       << r.threshold << '\n';
  }
}

}  // namespace kpp::lab

#endif  // KPP_SUBMODULAR_LAB_HPP_
