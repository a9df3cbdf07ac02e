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

#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <set>

#include <gtest/gtest.h>

#include "kpp/oracle.hpp"
#include "kpp/selector.hpp"
#include "kpp/submodular_lab.hpp"
#include "test_util.hpp"

namespace kpp {
namespace {

using testing::constant_patches;
using testing::random_patches;

// Independent check: at every step, recompute masked_mse through
// reconstruct() for every open candidate and take the first strict minimum.
void expect_matches_exhaustive_argmin(const Oracle& oracle, const PatchArray& truth,
                                      const SelectionTrace& trace) {
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    if (trace.steps[i].candidates_evaluated == 0) continue;  // init patch
    const PatchSet before = trace.prefix(i);
    double best = std::numeric_limits<double>::infinity();
    PatchIndex arg = truth.n_patches();
    for (PatchIndex p = 0; p < truth.n_patches(); ++p) {
      if (before.contains(p)) continue;
      const PatchSet s = before.with(p);
      const double loss = masked_mse(oracle.reconstruct(truth, s), truth, s);
      if (loss < best) {
        best = loss;
        arg = p;
      }
    }
    ASSERT_EQ(trace.steps[i].chosen, arg) << "step " << i + 1;
    ASSERT_NEAR(trace.steps[i].loss_after, best, 1e-12);
  }
}

void expect_nested(const SelectionTrace& trace) {
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const PatchSet s = trace.prefix(i + 1);
    ASSERT_EQ(s.size(), i + 1);
    if (i > 0) {
      const PatchSet before = trace.prefix(i);
      for (PatchIndex p : before.indices()) ASSERT_TRUE(s.contains(p));
    }
  }
  ASSERT_EQ(trace.prefix(trace.steps.size()).indices(), trace.selected.indices());
}

TEST(ResolveBudget, Examples) {
  EXPECT_EQ(resolve_budget(0.10, 196).n_keep, 19u);
  EXPECT_EQ(resolve_budget(1.0, 196).n_keep, 196u);
  EXPECT_EQ(resolve_budget(0.001, 196).n_keep, 1u);
}

TEST(ResolveBudget, MatchesIntegerArithmetic) {
  // r = k/1000 exactly representable enough that floor(r*n) = floor(k*n/1000)
  // except at exact multiples; compare to integer division for those that
  // are not boundary cases.
  for (std::size_t n : {1u, 9u, 16u, 196u}) {
    for (int k = 1; k <= 1000; ++k) {
      const double r = k / 1000.0;
      const std::size_t exact = static_cast<std::size_t>(k) * n / 1000;
      const std::size_t got = resolve_budget(r, n).n_keep;
      if ((static_cast<std::size_t>(k) * n) % 1000 != 0) {
        ASSERT_EQ(got, std::max<std::size_t>(1, exact)) << r << " " << n;
      }
      ASSERT_GE(got, 1u);
      ASSERT_LE(got, n);
    }
  }
}

TEST(ResolveBudget, RejectsOutOfRange) {
  EXPECT_THROW(resolve_budget(0.0, 196), std::invalid_argument);
  EXPECT_THROW(resolve_budget(1.01, 196), std::invalid_argument);
  EXPECT_THROW(resolve_budget(std::nan(""), 196), std::invalid_argument);
}

TEST(InitPolicy, ParseAndResolve) {
  EXPECT_EQ(InitPolicy::parse("central").resolve(196), PatchIndex{105});
  EXPECT_EQ(InitPolicy::parse("none").resolve(196), std::nullopt);
  EXPECT_EQ(InitPolicy::parse("17").resolve(196), PatchIndex{17});
  EXPECT_EQ(InitPolicy::parse("17").name(), "17");
  EXPECT_THROW(InitPolicy::parse("middle"), std::invalid_argument);
  EXPECT_THROW(InitPolicy::explicit_index(196).resolve(196), std::invalid_argument);
}

// With one visible patch, mean-fill predicts every masked patch as that
// patch; the odd patch is therefore the worst single choice, and all
// background choices tie exactly.
TEST(KppGreedy, OddPatchOnConstantBackgroundIsWorstFirstPick) {
  PatchArray truth = constant_patches(4, 2, 3, 0.5);
  for (double& v : truth.patch(5)) v = 0.9;
  const MeanFillOracle oracle;
  const SelectionTrace t = kpp_greedy(oracle, truth, Budget{1.0 / 16, 1}, InitPolicy::none());
  ASSERT_EQ(t.steps.size(), 1u);
  EXPECT_EQ(t.steps[0].chosen, 0u);
  const double odd = masked_mse(oracle.reconstruct(truth, PatchSet(16, {5})), truth,
                                PatchSet(16, {5}));
  EXPECT_GT(odd, t.steps[0].loss_after);
  // Revealing the odd patch would pull the fill away from the background, so
  // the second pick is another background patch.
  const SelectionTrace t2 = kpp_greedy(oracle, truth, Budget{2.0 / 16, 2}, InitPolicy::none());
  EXPECT_EQ(t2.order(), (std::vector<PatchIndex>{0, 1}));
  EXPECT_NEAR(t2.steps[1].loss_after, 0.4 * 0.4 / 14, 1e-15);
}

TEST(KppGreedy, ConstantImageTiesGoToLowestIndex) {
  const PatchArray truth = constant_patches(4, 2, 3, 0.5);
  const SelectionTrace t =
      kpp_greedy(MeanFillOracle(), truth, Budget{3.0 / 16, 3}, InitPolicy::none());
  EXPECT_EQ(t.order(), (std::vector<PatchIndex>{0, 1, 2}));
}

TEST(KppGreedy, IdwThreeByThreeMatchesExhaustiveArgmin) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PatchArray truth = random_patches(3, 4, 3, seed);
    const IdwOracle oracle(2.0);
    const SelectionTrace t = kpp_greedy(oracle, truth, Budget{2.0 / 9, 2}, InitPolicy::none());
    ASSERT_EQ(t.steps.size(), 2u);
    EXPECT_EQ(t.steps[0].candidates_evaluated, 9u);
    EXPECT_EQ(t.steps[1].candidates_evaluated, 8u);
    expect_matches_exhaustive_argmin(oracle, truth, t);
  }
}

TEST(KppGreedy, DefinitionEquivalenceAcrossOraclesAndInits) {
  const MeanFillOracle meanfill;
  const IdwOracle idw(2.0), idw_steep(3.5);
  const Oracle* oracles[] = {&meanfill, &idw, &idw_steep};
  for (const Oracle* oracle : oracles) {
    for (std::size_t side : {3u, 4u}) {
      for (const InitPolicy& init : {InitPolicy::central(), InitPolicy::none()}) {
        const PatchArray truth = random_patches(side, 2, 3, side * 31 + 7);
        const std::size_t n = side * side;
        const SelectionTrace t = kpp_greedy(*oracle, truth, Budget{1.0, n}, init);
        ASSERT_EQ(t.steps.size(), n);
        expect_nested(t);
        expect_matches_exhaustive_argmin(*oracle, truth, t);
        EXPECT_EQ(t.steps.back().loss_after, 0.0);
      }
    }
  }
}

TEST(KppGreedy, CentralInitComesFirstAndCountsTowardBudget) {
  const PatchArray truth = random_patches(14, 2, 3, 1);
  const SelectionTrace t =
      kpp_greedy(IdwOracle(), truth, resolve_budget(0.10, 196), InitPolicy::central());
  ASSERT_EQ(t.steps.size(), 19u);
  EXPECT_EQ(t.steps[0].chosen, 105u);
  EXPECT_EQ(t.steps[0].candidates_evaluated, 0u);
  EXPECT_EQ(t.steps[1].candidates_evaluated, 195u);
  expect_nested(t);
}

TEST(KppGreedy, ThreadCountDoesNotChangeTrace) {
  const PatchArray truth = random_patches(8, 4, 3, 3);
  const IdwOracle oracle;
  const Budget b = resolve_budget(0.5, 64);
  const SelectionTrace one = kpp_greedy(oracle, truth, b, InitPolicy::central(), {1});
  for (std::size_t threads : {2u, 3u, 8u}) {
    EXPECT_EQ(kpp_greedy(oracle, truth, b, InitPolicy::central(), {threads}), one);
  }
  // The reconstruct-per-candidate path too.
  class Plain final : public Oracle {
   public:
    std::string id() const override { return "plain"; }
    bool pass_through() const override { return true; }
    Reconstruction reconstruct(const PatchArray& t, const PatchSet& s) const override {
      return MeanFillOracle().reconstruct(t, s);
    }
  } plain;
  const SelectionTrace p1 = kpp_greedy(plain, truth, Budget{0.1, 6}, InitPolicy::none(), {1});
  EXPECT_EQ(kpp_greedy(plain, truth, Budget{0.1, 6}, InitPolicy::none(), {4}), p1);
}

TEST(KppGreedy, PrefixOfLargerBudgetEqualsSmallerRun) {
  const PatchArray truth = random_patches(6, 3, 3, 8);
  const IdwOracle oracle;
  const SelectionTrace big = kpp_greedy(oracle, truth, resolve_budget(0.5, 36), InitPolicy::none());
  for (double r : {0.05, 0.1, 0.25}) {
    const Budget b = resolve_budget(r, 36);
    const SelectionTrace small = kpp_greedy(oracle, truth, b, InitPolicy::none());
    EXPECT_TRUE(small.selected == big.prefix(b.n_keep));
  }
}

class FailingOracle final : public Oracle {
 public:
  explicit FailingOracle(int fail_after) : fail_after_(fail_after) {}
  std::string id() const override { return "failing"; }
  bool pass_through() const override { return true; }
  Reconstruction reconstruct(const PatchArray& t, const PatchSet& s) const override {
    if (calls_.fetch_add(1) >= fail_after_) throw OracleError("backend unavailable");
    return MeanFillOracle().reconstruct(t, s);
  }

 private:
  int fail_after_;
  mutable std::atomic<int> calls_{0};
};

TEST(KppGreedy, OracleFailureCarriesStepContext) {
  const PatchArray truth = random_patches(3, 2, 1, 0);
  const FailingOracle oracle(12);  // 9 on step 1, fails during step 2
  try {
    kpp_greedy(oracle, truth, Budget{1.0, 9}, InitPolicy::none());
    FAIL() << "expected OracleError";
  } catch (const OracleError& e) {
    EXPECT_NE(std::string(e.what()).find("selection step 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("backend unavailable"), std::string::npos);
  }
}

TEST(LazyGreedy, MatchesGreedyOnCoverageWithFewerEvaluations) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SetFunction f = lab::make_random_coverage(12, 20, 5, seed);
    ASSERT_TRUE(lab::check_diminishing_returns(f, lab::CheckMode::exhaustive()).empty());
    const SelectionTrace naive = kpp_greedy(f, 5);
    const SelectionTrace lazy = lazy_greedy(f, 5);
    EXPECT_EQ(lazy.order(), naive.order()) << seed;
    for (std::size_t i = 0; i < lazy.steps.size(); ++i) {
      EXPECT_LE(lazy.steps[i].candidates_evaluated, 12 - i);
      EXPECT_EQ(lazy.steps[i].loss_after, naive.steps[i].loss_after);
    }
    EXPECT_LE(lazy.total_evaluations(), naive.total_evaluations());
  }
}

TEST(LazyGreedy, FewerEvaluationsOnFixedCoverageFixture) {
  // Disjoint sets of decreasing size: stale bounds stay exact, so each later
  // step re-evaluates only the top.
  const SetFunction f = lab::make_coverage_function(
      {{0, 1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11}, {12, 13}, {14}, {15}});
  const SelectionTrace lazy = lazy_greedy(f, 4);
  EXPECT_EQ(lazy.order(), (std::vector<PatchIndex>{0, 1, 2, 3}));
  EXPECT_EQ(lazy.total_evaluations(), 6u + 1 + 1 + 1);
  EXPECT_EQ(kpp_greedy(f, 4).total_evaluations(), 6u + 5 + 4 + 3);
}

TEST(LazyGreedy, ConstantImageMatchesGreedy) {
  const PatchArray truth = constant_patches(4, 2, 3, 0.5);
  for (const InitPolicy& init : {InitPolicy::none(), InitPolicy::central()}) {
    const Budget b{0.25, 4};
    EXPECT_EQ(lazy_greedy(MeanFillOracle(), truth, b, init).order(),
              kpp_greedy(MeanFillOracle(), truth, b, init).order());
    // IDW weights leave rounding noise on a nonzero constant; zero is exact.
    const PatchArray zeros = constant_patches(4, 2, 3, 0.0);
    EXPECT_EQ(lazy_greedy(IdwOracle(), zeros, b, init).order(),
              kpp_greedy(IdwOracle(), zeros, b, init).order());
  }
}

TEST(LazyGreedy, RejectsCostFunctions) {
  const SetFunction cost(3, Orientation::kCost, [](const PatchSet& s) { return double(s.size()); });
  EXPECT_THROW(lazy_greedy(cost, 2), std::invalid_argument);
}

TEST(RandomSelect, DeterministicForSeed) {
  const Budget b = resolve_budget(0.1, 196);
  EXPECT_EQ(random_select(196, b, 42, InitPolicy::none()),
            random_select(196, b, 42, InitPolicy::none()));
  EXPECT_NE(random_select(196, b, 42, InitPolicy::none()),
            random_select(196, b, 43, InitPolicy::none()));
}

TEST(RandomSelect, FullBudgetIsFullSet) {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    EXPECT_TRUE(random_select(196, Budget{1.0, 196}, seed, InitPolicy::central())
                    .same_members(PatchSet::full(196)));
  }
}

TEST(RandomSelect, SweepOfSeedsGivesValidSets) {
  const Budget b = resolve_budget(0.1, 196);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const PatchSet s = random_select(196, b, seed, InitPolicy::none());
    ASSERT_EQ(s.size(), 19u);
    const std::set<PatchIndex> distinct(s.indices().begin(), s.indices().end());
    ASSERT_EQ(distinct.size(), 19u);
    ASSERT_LT(*distinct.rbegin(), 196u);
  }
}

TEST(RandomSelect, CentralInitIncluded) {
  const PatchSet s = random_select(196, resolve_budget(0.1, 196), 5, InitPolicy::central());
  EXPECT_EQ(s.indices().front(), 105u);
  EXPECT_EQ(s.size(), 19u);
}

}  // namespace
}  // namespace kpp
