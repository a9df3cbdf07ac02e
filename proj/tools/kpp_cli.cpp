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

// kpp: key-patch selection, evaluation and submodularity checks.
//
// Exit codes: 0 ok, 1 usage, 2 I/O, 3 oracle.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kpp/harness.hpp"
#include "kpp/image_io.hpp"
#include "kpp/oracle.hpp"
#include "kpp/oracle_client.hpp"
#include "kpp/selector.hpp"
#include "kpp/submodular_lab.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitOracle = 3;

struct OracleFlags {
  std::string kind = "idw";
  double alpha = 2.0;
  std::string url;
};

struct GridFlags {
  std::size_t image_side = 224;
  std::size_t patch_side = 16;
  kpp::GridSpec spec() const { return kpp::GridSpec(image_side, patch_side); }
};

struct CorpusFlags {
  std::string directory;
  std::string kind = "blobs";
  std::size_t count = 20;
  std::uint64_t seed = 7;
};

void add_oracle_flags(CLI::App* cmd, OracleFlags& f) {
  cmd->add_option("--oracle", f.kind, "Reconstruction oracle")
      ->check(CLI::IsMember({"meanfill", "idw", "remote"}))
      ->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "IDW distance exponent")->capture_default_str();
  cmd->add_option("--oracle-url", f.url,
                  "Remote oracle base URL (overrides KPP_ORACLE_URL)");
}

void add_grid_flags(CLI::App* cmd, GridFlags& g) {
  cmd->add_option("--image-side", g.image_side, "Resized image side in pixels")
      ->capture_default_str();
  cmd->add_option("--patch-side", g.patch_side, "Patch side in pixels")
      ->capture_default_str();
}

void add_corpus_flags(CLI::App* cmd, CorpusFlags& c) {
  cmd->add_option("--corpus", c.directory, "Directory of PNG/JPEG images");
  cmd->add_option("--kind", c.kind, "Synthetic corpus kind")
      ->check(CLI::IsMember({"gradient", "checker", "blobs"}))
      ->capture_default_str();
  cmd->add_option("--count", c.count, "Synthetic image count")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Synthetic corpus seed")->capture_default_str();
}

std::unique_ptr<kpp::Oracle> make_oracle(const OracleFlags& f,
                                         const kpp::GridSpec& grid) {
  if (f.kind == "meanfill") return std::make_unique<kpp::MeanFillOracle>();
  if (f.kind == "idw") return std::make_unique<kpp::IdwOracle>(f.alpha);
  kpp::remote::ClientConfig config;
  config.url = kpp::remote::resolve_oracle_url(f.url);
  if (config.url.empty()) {
    throw std::invalid_argument("--oracle remote needs --oracle-url or KPP_ORACLE_URL");
  }
  auto oracle = std::make_unique<kpp::remote::RemoteOracle>(config, grid);
  oracle->connect();
  return oracle;
}

std::vector<kpp::harness::CorpusImage> load_corpus(const CorpusFlags& c,
                                                   const kpp::GridSpec& grid) {
  kpp::harness::CorpusSpec spec;
  spec.grid = grid;
  spec.seed = c.seed;
  spec.count = c.count;
  if (!c.directory.empty()) {
    spec.kind = kpp::harness::CorpusKind::kDirectory;
    spec.directory = c.directory;
  } else {
    spec.kind = kpp::harness::parse_corpus_kind(c.kind);
  }
  return kpp::harness::synth_corpus(spec);
}

// Writes to the file at path, or stdout when path is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw kpp::IoError("cannot write " + path);
  out << text;
  if (!out) throw kpp::IoError("failed writing " + path);
}

std::string rows_to_csv(const std::vector<kpp::harness::CurveRow>& rows) {
  std::ostringstream os;
  kpp::harness::write_csv(os, rows);
  return os.str();
}

int cmd_select(const std::string& image, double ratio, const std::string& init_text,
               bool lazy, std::size_t threads, const GridFlags& gf,
               const OracleFlags& of, const std::string& out) {
  const kpp::GridSpec grid = gf.spec();
  const kpp::InitPolicy init = kpp::InitPolicy::parse(init_text);
  const kpp::PatchArray patches = kpp::split(kpp::load_and_resize(image, grid), grid);
  const kpp::Budget budget = kpp::resolve_budget(ratio, grid.n_patches());
  const auto oracle = make_oracle(of, grid);
  const kpp::SelectorOptions options{threads};
  const kpp::SelectionTrace trace =
      lazy ? kpp::lazy_greedy(*oracle, patches, budget, init, options)
           : kpp::kpp_greedy(*oracle, patches, budget, init, options);

  nlohmann::json j;
  j["image"] = image;
  j["grid"] = {{"image_side", grid.image_side()},
               {"patch_side", grid.patch_side()},
               {"grid_side", grid.grid_side()},
               {"n_patches", grid.n_patches()}};
  j["oracle"] = oracle->id();
  j["method"] = lazy ? "kpp_lazy" : "kpp";
  j["init"] = init.name();
  j["budget"] = {{"ratio", budget.ratio}, {"n_keep", budget.n_keep}};
  std::vector<std::size_t> chosen, evaluated;
  std::vector<double> losses;
  for (const auto& s : trace.steps) {
    chosen.push_back(s.chosen);
    losses.push_back(s.loss_after);
    evaluated.push_back(s.candidates_evaluated);
  }
  j["chosen"] = chosen;
  j["loss_after"] = losses;
  j["candidates_evaluated"] = evaluated;
  emit(out, j.dump(2) + "\n");
  return 0;
}

int write_rows(const std::vector<kpp::harness::CurveRow>& rows, const std::string& out,
               const std::string& svg) {
  emit(out, rows_to_csv(rows));
  if (!svg.empty()) kpp::harness::render_curves_svg(rows, svg);
  return 0;
}

int cmd_eval(const CorpusFlags& cf, const GridFlags& gf, const OracleFlags& of,
             const std::vector<double>& budgets, const std::vector<std::uint64_t>& seeds,
             const std::string& init_text, bool lazy, std::size_t threads,
             const std::string& out, const std::string& svg) {
  const kpp::GridSpec grid = gf.spec();
  const kpp::InitPolicy init = kpp::InitPolicy::parse(init_text);
  const auto corpus = load_corpus(cf, grid);
  const auto oracle = make_oracle(of, grid);
  std::cerr << "eval: " << corpus.size() << " images, oracle " << oracle->id()
            << ", init " << init.name() << "\n";
  std::vector<kpp::harness::CurveRow> rows;
  try {
    rows = kpp::harness::evaluate_curves(corpus, grid, *oracle, budgets, seeds, init,
                                         {threads, lazy});
  } catch (const kpp::harness::PartialRunError& e) {
    emit(out, rows_to_csv(e.rows()));
    throw;
  }
  for (const auto& [series, points] : kpp::harness::summarize(rows)) {
    for (const auto& p : points) {
      std::cerr << "mean " << series << " r=" << p.budget_ratio
                << " masked_mse=" << p.mean_masked_mse << "\n";
    }
  }
  return write_rows(rows, out, svg);
}

int cmd_ablate(const CorpusFlags& cf, const GridFlags& gf, const OracleFlags& of,
               const std::vector<double>& budgets, std::size_t threads,
               const std::string& out, const std::string& svg) {
  const kpp::GridSpec grid = gf.spec();
  const auto corpus = load_corpus(cf, grid);
  const auto oracle = make_oracle(of, grid);
  std::vector<kpp::harness::CurveRow> rows;
  try {
    rows = kpp::harness::ablate_init(corpus, grid, *oracle, budgets, {threads, false});
  } catch (const kpp::harness::PartialRunError& e) {
    emit(out, rows_to_csv(e.rows()));
    throw;
  }
  for (const auto& line : kpp::harness::summarize_ablation(rows)) {
    std::cerr << "ablation r=" << line.budget_ratio << " central=" << line.mean_central
              << " none=" << line.mean_none
              << " none_minus_central=" << line.mean_none - line.mean_central << "\n";
  }
  return write_rows(rows, out, svg);
}

struct CheckFlags {
  std::string fixture;
  std::string image;
  std::size_t n = 8;
  std::string mode = "exhaustive";
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  double tolerance = kpp::lab::kDefaultTolerance;
  std::string out;
};

kpp::SetFunction make_check_function(const CheckFlags& cf, const GridFlags& gf,
                                     const OracleFlags& of) {
  if (!cf.image.empty()) {
    const kpp::GridSpec grid = gf.spec();
    auto patches = std::make_shared<const kpp::PatchArray>(
        kpp::split(kpp::load_and_resize(cf.image, grid), grid));
    std::shared_ptr<const kpp::Oracle> oracle = make_oracle(of, grid);
    return kpp::lab::gain_from_image(oracle, patches);
  }
  std::mt19937_64 rng(cf.seed);
  if (cf.fixture == "coverage") {
    return kpp::lab::make_random_coverage(cf.n, 2 * cf.n, 4, cf.seed);
  }
  if (cf.fixture == "modular") {
    std::uniform_real_distribution<double> w(0.0, 1.0);
    std::vector<double> weights(cf.n);
    for (double& v : weights) v = w(rng);
    return kpp::lab::make_modular(weights);
  }
  if (cf.fixture == "square") return kpp::lab::make_supermodular_square(cf.n);
  throw std::invalid_argument("check-submodular needs --fixture or --image");
}

int cmd_check(const CheckFlags& cf, const GridFlags& gf, const OracleFlags& of) {
  const kpp::SetFunction f = make_check_function(cf, gf, of);
  const kpp::lab::CheckMode mode = cf.mode == "exhaustive"
                                       ? kpp::lab::CheckMode::exhaustive()
                                       : kpp::lab::CheckMode::sampled(cf.trials, cf.seed);
  kpp::lab::CheckStats stats;
  const auto violations = kpp::lab::check_diminishing_returns(f, mode, cf.tolerance, &stats);
  const auto monotone = kpp::lab::check_monotone(f, mode, cf.tolerance);
  std::ostringstream csv;
  kpp::lab::write_violations_csv(csv, violations);
  if (!cf.out.empty()) emit(cf.out, csv.str());
  std::cout << "function=" << f.name() << " n=" << f.ground_size() << " mode=" << cf.mode
            << " triples=" << stats.triples << " violations=" << violations.size()
            << " max_deficit=" << stats.max_deficit
            << " monotone_violations=" << monotone.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greedy key-patch selection and evaluation"};
  app.require_subcommand(1);

  GridFlags grid;
  OracleFlags oracle;
  CorpusFlags corpus;
  std::size_t threads = 1;
  std::string out, svg, init = "central";
  bool lazy = false;

  auto* select = app.add_subcommand("select", "Select key patches of one image");
  std::string image;
  double ratio = 0.10;
  select->add_option("--image", image, "Input PNG/JPEG")->required();
  select->add_option("--ratio", ratio, "Budget ratio in (0,1]")->capture_default_str();
  select->add_option("--init", init, "central, none or a patch index")->capture_default_str();
  select->add_flag("--lazy", lazy, "Use lazy greedy");
  select->add_option("--threads", threads, "Candidate sweep threads")->capture_default_str();
  select->add_option("--out", out, "Output JSON path (default stdout)");
  add_grid_flags(select, grid);
  add_oracle_flags(select, oracle);

  std::vector<double> budgets = kpp::harness::kDefaultBudgets;
  std::vector<std::uint64_t> seeds = kpp::harness::kDefaultSeeds;
  auto* eval = app.add_subcommand("eval", "Greedy vs random loss curves");
  add_corpus_flags(eval, corpus);
  add_grid_flags(eval, grid);
  add_oracle_flags(eval, oracle);
  eval->add_option("--budgets", budgets, "Budget ratios")->delimiter(',')->capture_default_str();
  eval->add_option("--seeds", seeds, "Random-baseline seeds")->delimiter(',')->capture_default_str();
  eval->add_option("--init", init, "central, none or a patch index")->capture_default_str();
  eval->add_flag("--lazy", lazy, "Also emit lazy-greedy rows");
  eval->add_option("--threads", threads)->capture_default_str();
  eval->add_option("--out", out, "Output CSV path (default stdout)");
  eval->add_option("--svg", svg, "Output SVG path");

  std::vector<double> ablate_budgets = {0.05, 0.10, 0.25, 0.50, 1.0};
  auto* ablate = app.add_subcommand("ablate", "Central initial patch vs none");
  add_corpus_flags(ablate, corpus);
  add_grid_flags(ablate, grid);
  add_oracle_flags(ablate, oracle);
  ablate->add_option("--budgets", ablate_budgets, "Budget ratios")
      ->delimiter(',')->capture_default_str();
  ablate->add_option("--threads", threads)->capture_default_str();
  ablate->add_option("--out", out, "Output CSV path (default stdout)");
  ablate->add_option("--svg", svg, "Output SVG path");

  CheckFlags check;
  auto* chk = app.add_subcommand("check-submodular",
                                 "Diminishing-returns and monotonicity checks");
  auto* fixture_opt = chk->add_option("--fixture", check.fixture, "Synthetic set function")
                          ->check(CLI::IsMember({"coverage", "modular", "square"}));
  chk->add_option("--image", check.image, "Image whose gain function is checked")
      ->excludes(fixture_opt);
  chk->add_option("--n", check.n, "Fixture ground-set size")->capture_default_str();
  chk->add_option("--mode", check.mode)
      ->check(CLI::IsMember({"exhaustive", "sampled"}))
      ->capture_default_str();
  chk->add_option("--trials", check.trials, "Sampled-mode trials")->capture_default_str();
  chk->add_option("--seed", check.seed)->capture_default_str();
  chk->add_option("--tolerance", check.tolerance)->capture_default_str();
  chk->add_option("--out", check.out, "Violation CSV path");
  add_grid_flags(chk, grid);
  add_oracle_flags(chk, oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*select) return cmd_select(image, ratio, init, lazy, threads, grid, oracle, out);
    if (*eval) {
      return cmd_eval(corpus, grid, oracle, budgets, seeds, init, lazy, threads, out, svg);
    }
    if (*ablate) return cmd_ablate(corpus, grid, oracle, ablate_budgets, threads, out, svg);
    if (*chk) return cmd_check(check, grid, oracle);
  } catch (const kpp::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const kpp::OracleError& e) {
    std::cerr << "oracle error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
