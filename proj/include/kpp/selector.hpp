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

// Key-patch selection: the greedy loop that grows the visible set one patch
// at a time by minimum masked reconstruction loss, its lazy (CELF) variant,
// and the uniform random baseline.

#ifndef KPP_SELECTOR_HPP_
#define KPP_SELECTOR_HPP_

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpp/error.hpp"
#include "kpp/oracle.hpp"
#include "kpp/parallel.hpp"
#include "kpp/patch_grid.hpp"
#include "kpp/patch_set.hpp"
#include "kpp/set_function.hpp"

namespace kpp {

class InitPolicy {
 public:
  enum class Kind { kCentral, kNone, kExplicit };

  static InitPolicy central() { return InitPolicy(Kind::kCentral, 0); }
  static InitPolicy none() { return InitPolicy(Kind::kNone, 0); }
  static InitPolicy explicit_index(PatchIndex idx) {
    return InitPolicy(Kind::kExplicit, idx);
  }

  // "central", "none" or a decimal patch index.
  static InitPolicy parse(const std::string& text) {
    if (text == "central") return central();
    if (text == "none") return none();
    if (text.empty() ||
        text.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("init policy must be central, none or an index: " + text);
    }
    return explicit_index(std::stoull(text));
  }

  Kind kind() const { return kind_; }

  std::string name() const {
    switch (kind_) {
      case Kind::kCentral: return "central";
      case Kind::kNone: return "none";
      case Kind::kExplicit: return std::to_string(index_);
    }
    return "";
  }

  // The initial patch for a square grid of n_patches cells, if any.
  std::optional<PatchIndex> resolve(std::size_t n_patches) const {
    switch (kind_) {
      case Kind::kNone:
        return std::nullopt;
      case Kind::kCentral: {
        const auto side = static_cast<std::size_t>(
            std::llround(std::sqrt(static_cast<double>(n_patches))));
        if (side * side != n_patches) {
          throw std::invalid_argument("central init needs a square grid");
        }
        const std::size_t mid = side / 2;
        return mid * side + mid;
      }
      case Kind::kExplicit:
        if (index_ >= n_patches) {
          throw std::invalid_argument("init index " + std::to_string(index_) +
                                      " out of range");
        }
        return index_;
    }
    return std::nullopt;
  }

  friend bool operator==(const InitPolicy&, const InitPolicy&) = default;

 private:
  InitPolicy(Kind kind, PatchIndex index) : kind_(kind), index_(index) {}

  Kind kind_;
  PatchIndex index_;
};

struct Budget {
  double ratio = 1.0;
  std::size_t n_keep = 1;
};

// n_keep = max(1, floor(r * n)).
inline Budget resolve_budget(double ratio, std::size_t n_patches) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("budget ratio must be in (0, 1], got " +
                                std::to_string(ratio));
  }
  if (n_patches == 0) throw std::invalid_argument("budget: no patches");
  const auto floored =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_patches)));
  return Budget{ratio, std::max<std::size_t>(1, std::min(floored, n_patches))};
}

struct SelectionStep {
  PatchIndex chosen = 0;
  double loss_after = 0.0;
  // Objective evaluations spent on this step; 0 for the initial patch.
  std::size_t candidates_evaluated = 0;

  friend bool operator==(const SelectionStep&, const SelectionStep&) = default;
};

struct SelectionTrace {
  std::vector<SelectionStep> steps;
  PatchSet selected;

  std::vector<PatchIndex> order() const { return selected.indices(); }

  std::size_t total_evaluations() const {
    std::size_t total = 0;
    for (const auto& s : steps) total += s.candidates_evaluated;
    return total;
  }

  // The visible set after the first k steps.
  PatchSet prefix(std::size_t k) const {
    if (k > steps.size()) throw std::invalid_argument("trace prefix too long");
    PatchSet s(selected.universe());
    for (std::size_t i = 0; i < k; ++i) s.insert(steps[i].chosen);
    return s;
  }

  friend bool operator==(const SelectionTrace&, const SelectionTrace&) = default;
};

struct SelectorOptions {
  std::size_t threads = 1;
};

struct Evaluation {
  double objective = 0.0;
  double loss = 0.0;
};

// What the greedy loops need from a problem. cost(p) is minimised by the
// plain greedy; value(p) is the gain-oriented value of S ∪ {p} that the lazy
// greedy maximises through marginals.
template <class T>
concept GreedyProblem = requires(T& t, const T& ct, PatchIndex p) {
  { ct.universe() } -> std::convertible_to<std::size_t>;
  { ct.contains(p) } -> std::convertible_to<bool>;
  { ct.cost(p) } -> std::same_as<Evaluation>;
  { ct.value(p) } -> std::same_as<Evaluation>;
  { ct.current() } -> std::same_as<Evaluation>;
  t.commit(p);
};

namespace detail {

[[noreturn]] inline void rethrow_with_step(std::size_t step) {
  try {
    throw;
  } catch (const std::exception& e) {
    throw OracleError("selection step " + std::to_string(step) + ": " + e.what());
  }
}

template <GreedyProblem Problem>
void apply_init(Problem& problem, std::optional<PatchIndex> init,
                std::size_t n_keep, SelectionTrace& trace) {
  if (!init) return;
  if (n_keep < 1) throw std::invalid_argument("budget too small for init patch");
  try {
    problem.commit(*init);
    trace.selected.insert(*init);
    trace.steps.push_back({*init, problem.current().loss, 0});
  } catch (...) {
    rethrow_with_step(1);
  }
}

template <GreedyProblem Problem>
std::vector<PatchIndex> open_candidates(const Problem& problem) {
  std::vector<PatchIndex> out;
  for (PatchIndex p = 0; p < problem.universe(); ++p) {
    if (!problem.contains(p)) out.push_back(p);
  }
  return out;
}

}  // namespace detail

// Plain greedy: at each step evaluate every open candidate and keep the
// minimum cost; equal costs go to the lowest index.
template <GreedyProblem Problem>
SelectionTrace run_greedy(Problem& problem, std::size_t n_keep,
                          std::optional<PatchIndex> init,
                          const SelectorOptions& options = {}) {
  const std::size_t n = problem.universe();
  if (n_keep < 1 || n_keep > n) throw std::invalid_argument("n_keep out of range");
  SelectionTrace trace;
  trace.selected = PatchSet(n);
  detail::apply_init(problem, init, n_keep, trace);

  while (trace.selected.size() < n_keep) {
    const std::size_t step = trace.selected.size() + 1;
    const auto candidates = detail::open_candidates(problem);
    std::vector<Evaluation> results(candidates.size());
    try {
      parallel_for(candidates.size(), options.threads, [&](std::size_t i) {
        results[i] = problem.cost(candidates[i]);
      });
    } catch (...) {
      detail::rethrow_with_step(step);
    }
    double best_cost = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (results[i].objective < best_cost) {
        best_cost = results[i].objective;
        best = i;
      }
    }
    if (!best) {
      throw OracleError("selection step " + std::to_string(step) +
                        ": no candidate has a finite loss");
    }
    const PatchIndex chosen = candidates[*best];
    problem.commit(chosen);
    trace.selected.insert(chosen);
    trace.steps.push_back({chosen, results[*best].loss, candidates.size()});
  }
  return trace;
}

// Lazy greedy (CELF) over value(): stale marginals are upper bounds when the
// value function has diminishing returns, so only the heap top needs
// re-evaluation. Matches run_greedy only on such functions.
template <GreedyProblem Problem>
SelectionTrace run_lazy_greedy(Problem& problem, std::size_t n_keep,
                               std::optional<PatchIndex> init,
                               const SelectorOptions& options = {}) {
  const std::size_t n = problem.universe();
  if (n_keep < 1 || n_keep > n) throw std::invalid_argument("n_keep out of range");
  SelectionTrace trace;
  trace.selected = PatchSet(n);
  detail::apply_init(problem, init, n_keep, trace);
  if (trace.selected.size() >= n_keep) return trace;

  struct Entry {
    double marginal;
    double value;
    double loss;
    PatchIndex index;
    std::size_t fresh_at;  // step at which marginal was computed
  };
  // Max-heap on marginal, lowest index first among equals.
  auto lower_priority = [](const Entry& a, const Entry& b) {
    if (a.marginal != b.marginal) return a.marginal < b.marginal;
    return a.index > b.index;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(
      lower_priority);

  std::size_t step = trace.selected.size() + 1;
  double current_value = 0.0;
  {
    const auto candidates = detail::open_candidates(problem);
    std::vector<Evaluation> results(candidates.size());
    try {
      current_value = problem.current().objective;
      parallel_for(candidates.size(), options.threads, [&](std::size_t i) {
        results[i] = problem.value(candidates[i]);
      });
    } catch (...) {
      detail::rethrow_with_step(step);
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      heap.push({results[i].objective - current_value, results[i].objective,
                 results[i].loss, candidates[i], step});
    }
  }
  std::size_t evaluated = heap.size();

  while (trace.selected.size() < n_keep) {
    Entry top = heap.top();
    heap.pop();
    if (top.fresh_at == step) {
      if (!std::isfinite(top.value)) {
        throw OracleError("selection step " + std::to_string(step) +
                          ": no candidate has a finite value");
      }
      problem.commit(top.index);
      trace.selected.insert(top.index);
      trace.steps.push_back({top.index, top.loss, evaluated});
      current_value = top.value;
      ++step;
      evaluated = 0;
      continue;
    }
    Evaluation e;
    try {
      e = problem.value(top.index);
    } catch (...) {
      detail::rethrow_with_step(step);
    }
    ++evaluated;
    heap.push({e.objective - current_value, e.objective, e.loss, top.index, step});
  }
  return trace;
}

// Image problem: cost = masked MSE of S ∪ {p}; value = f(∅) − full MSE.
class ImageProblem {
 public:
  ImageProblem(const Oracle& oracle, const PatchArray& truth)
      : scorer_(oracle.make_scorer(truth)),
        empty_full_(zero_prediction_mse(truth)) {}

  std::size_t universe() const { return scorer_->current().universe(); }
  bool contains(PatchIndex p) const { return scorer_->current().contains(p); }

  Evaluation cost(PatchIndex p) const {
    const CandidateLoss l = scorer_->evaluate(p);
    return {l.masked, l.masked};
  }
  Evaluation value(PatchIndex p) const {
    const CandidateLoss l = scorer_->evaluate(p);
    return {empty_full_ - l.full, l.masked};
  }
  Evaluation current() const {
    const CandidateLoss l = scorer_->evaluate_current();
    return {empty_full_ - l.full, l.masked};
  }
  void commit(PatchIndex p) { scorer_->commit(p); }

 private:
  std::unique_ptr<SweepScorer> scorer_;
  double empty_full_;
};

// Set-function problem. The trace loss is the cost view: -f for gain
// functions, f for cost functions.
class SetFunctionProblem {
 public:
  explicit SetFunctionProblem(const SetFunction& f)
      : f_(f), set_(f.ground_size()) {}

  std::size_t universe() const { return f_.ground_size(); }
  bool contains(PatchIndex p) const { return set_.contains(p); }

  Evaluation cost(PatchIndex p) const {
    const double c = as_cost(f_(set_.with(p)));
    return {c, c};
  }
  Evaluation value(PatchIndex p) const {
    require_gain();
    const double v = f_(set_.with(p));
    return {v, -v};
  }
  Evaluation current() const {
    const double v = f_(set_);
    return {v, as_cost(v)};
  }
  void commit(PatchIndex p) { set_.insert(p); }

 private:
  double as_cost(double v) const {
    return f_.orientation() == Orientation::kGain ? -v : v;
  }
  void require_gain() const {
    if (f_.orientation() != Orientation::kGain) {
      throw std::invalid_argument("lazy greedy needs a gain-oriented set function");
    }
  }

  const SetFunction& f_;
  PatchSet set_;
};

inline SelectionTrace kpp_greedy(const Oracle& oracle, const PatchArray& patches,
                                 const Budget& budget, const InitPolicy& init,
                                 const SelectorOptions& options = {}) {
  ImageProblem problem(oracle, patches);
  return run_greedy(problem, budget.n_keep, init.resolve(patches.n_patches()),
                    options);
}

inline SelectionTrace lazy_greedy(const Oracle& oracle, const PatchArray& patches,
                                  const Budget& budget, const InitPolicy& init,
                                  const SelectorOptions& options = {}) {
  ImageProblem problem(oracle, patches);
  return run_lazy_greedy(problem, budget.n_keep,
                         init.resolve(patches.n_patches()), options);
}

inline SelectionTrace kpp_greedy(const SetFunction& f, std::size_t k,
                                 std::optional<PatchIndex> init = std::nullopt,
                                 const SelectorOptions& options = {}) {
  SetFunctionProblem problem(f);
  return run_greedy(problem, k, init, options);
}

inline SelectionTrace lazy_greedy(const SetFunction& f, std::size_t k,
                                  std::optional<PatchIndex> init = std::nullopt,
                                  const SelectorOptions& options = {}) {
  if (f.orientation() != Orientation::kGain) {
    throw std::invalid_argument("lazy greedy needs a gain-oriented set function");
  }
  SetFunctionProblem problem(f);
  return run_lazy_greedy(problem, k, init, options);
}

// Uniform sample without replacement; the init patch, if any, comes first.
inline PatchSet random_select(std::size_t n_patches, const Budget& budget,
                              std::uint64_t seed, const InitPolicy& init) {
  if (budget.n_keep < 1 || budget.n_keep > n_patches) {
    throw std::invalid_argument("random_select: n_keep out of range");
  }
  PatchSet out(n_patches);
  const auto first = init.resolve(n_patches);
  if (first) out.insert(*first);
  std::vector<PatchIndex> pool = out.complement();
  std::mt19937_64 rng(seed);
  const std::size_t need = budget.n_keep - out.size();
  for (std::size_t i = 0; i < need; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    out.insert(pool[i]);
  }
  return out;
}

}  // namespace kpp

#endif  // KPP_SELECTOR_HPP_
