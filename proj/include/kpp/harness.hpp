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

// Loss-curve and initial-patch ablation experiments over synthetic or
// on-disk corpora, with CSV and SVG output.

#ifndef KPP_HARNESS_HPP_
#define KPP_HARNESS_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "kpp/error.hpp"
#include "kpp/image_io.hpp"
#include "kpp/oracle.hpp"
#include "kpp/patch_grid.hpp"
#include "kpp/selector.hpp"

namespace kpp::harness {

inline const std::vector<double> kDefaultBudgets = {0.05, 0.10, 0.25, 0.50};
inline const std::vector<std::uint64_t> kDefaultSeeds = {0, 1, 2, 3, 4};
inline constexpr const char* kCsvVersionLine = "#kpp-csv-v1";
inline constexpr const char* kCsvHeader =
    "image_id,method,oracle_id,init_policy,budget_ratio,n_keep,seed,masked_mse";

enum class CorpusKind { kGradient, kChecker, kBlobs, kDirectory };

inline CorpusKind parse_corpus_kind(const std::string& s) {
  if (s == "gradient") return CorpusKind::kGradient;
  if (s == "checker") return CorpusKind::kChecker;
  if (s == "blobs") return CorpusKind::kBlobs;
  if (s == "directory") return CorpusKind::kDirectory;
  throw std::invalid_argument("unknown corpus kind: " + s);
}

inline const char* to_string(CorpusKind k) {
  switch (k) {
    case CorpusKind::kGradient: return "gradient";
    case CorpusKind::kChecker: return "checker";
    case CorpusKind::kBlobs: return "blobs";
    case CorpusKind::kDirectory: return "directory";
  }
  return "";
}

struct CorpusSpec {
  CorpusKind kind = CorpusKind::kBlobs;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  GridSpec grid = default_grid();
  std::filesystem::path directory;  // kDirectory only
};

struct CorpusImage {
  std::string id;
  ImageTensor image;
};

namespace detail {

inline std::mt19937_64 image_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

inline ImageTensor make_gradient(std::mt19937_64& rng, std::size_t side) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::bernoulli_distribution flip(0.5);
  const double theta = angle(rng);
  const double cx = std::cos(theta), cy = std::sin(theta);
  bool flips[3];
  for (bool& f : flips) f = flip(rng);
  std::vector<double> t(side * side);
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double v = x * cx + y * cy;
      t[y * side + x] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  ImageTensor img(side, side, 3);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double u = std::clamp((t[y * side + x] - lo) / (hi - lo), 0.0, 1.0);
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = flips[c] ? 1.0 - u : u;
    }
  }
  return img;
}

inline ImageTensor make_checker(std::mt19937_64& rng, std::size_t side) {
  std::uniform_int_distribution<std::size_t> period(8, 56);
  std::uniform_int_distribution<std::size_t> phase(0, 55);
  std::uniform_real_distribution<double> tone(0.0, 1.0);
  const std::size_t p = period(rng);
  const std::size_t ox = phase(rng), oy = phase(rng);
  double colors[2][3];
  for (auto& col : colors) {
    for (double& v : col) v = tone(rng);
  }
  ImageTensor img(side, side, 3);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t parity = ((x + ox) / p + (y + oy) / p) % 2;
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = colors[parity][c];
    }
  }
  return img;
}

inline ImageTensor make_blobs(std::mt19937_64& rng, std::size_t side) {
  std::uniform_int_distribution<int> count(3, 8);
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(side));
  std::uniform_real_distribution<double> sigma(side / 16.0, side / 5.0);
  std::uniform_real_distribution<double> amp(0.2, 0.9);
  struct Bump {
    double x, y, s;
    double a[3];
  };
  std::vector<Bump> bumps(static_cast<std::size_t>(count(rng)));
  for (auto& b : bumps) {
    b.x = pos(rng);
    b.y = pos(rng);
    b.s = sigma(rng);
    for (double& a : b.a) a = amp(rng);
  }
  ImageTensor img(side, side, 3);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      double v[3] = {0.0, 0.0, 0.0};
      for (const auto& b : bumps) {
        const double dx = x + 0.5 - b.x, dy = y + 0.5 - b.y;
        const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * b.s * b.s));
        for (int c = 0; c < 3; ++c) v[c] += b.a[c] * g;
      }
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = std::min(1.0, v[c]);
    }
  }
  return img;
}

inline std::string numbered_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu", prefix, i);
  return buf;
}

}  // namespace detail

// Deterministic for a fixed spec. Directory corpora take every .png/.jpg/.jpeg
// file in name order, ids being the file stems.
inline std::vector<CorpusImage> synth_corpus(const CorpusSpec& spec) {
  std::vector<CorpusImage> out;
  const std::size_t side = spec.grid.image_side();
  if (spec.kind == CorpusKind::kDirectory) {
    if (!std::filesystem::is_directory(spec.directory)) {
      throw IoError("corpus directory does not exist: " + spec.directory.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(spec.directory)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
    }
    if (files.empty()) {
      throw IoError("corpus directory has no PNG/JPEG images: " + spec.directory.string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out.push_back({f.stem().string(), load_and_resize(f, spec.grid)});
    }
    return out;
  }
  if (spec.count < 1) throw std::invalid_argument("corpus count must be >= 1");
  for (std::size_t i = 0; i < spec.count; ++i) {
    auto rng = detail::image_rng(spec.seed, i);
    switch (spec.kind) {
      case CorpusKind::kGradient:
        out.push_back({detail::numbered_id("gradient", i), detail::make_gradient(rng, side)});
        break;
      case CorpusKind::kChecker:
        out.push_back({detail::numbered_id("checker", i), detail::make_checker(rng, side)});
        break;
      case CorpusKind::kBlobs:
        out.push_back({detail::numbered_id("blobs", i), detail::make_blobs(rng, side)});
        break;
      case CorpusKind::kDirectory:
        break;
    }
  }
  return out;
}

struct CurveRow {
  std::string image_id;
  std::string method;  // kpp, kpp_lazy, random
  std::string oracle_id;
  std::string init_policy;
  double budget_ratio = 0.0;
  std::size_t n_keep = 0;
  std::optional<std::uint64_t> seed;  // random rows only
  double masked_mse = 0.0;

  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

inline bool row_order(const CurveRow& a, const CurveRow& b) {
  return std::tie(a.image_id, a.method, a.init_policy, a.budget_ratio, a.seed) <
         std::tie(b.image_id, b.method, b.init_policy, b.budget_ratio, b.seed);
}

// Thrown when the oracle fails mid-run; carries the rows of every image that
// completed so they can still be written.
class PartialRunError : public OracleError {
 public:
  PartialRunError(const std::string& what, std::vector<CurveRow> rows)
      : OracleError(what), rows_(std::move(rows)) {}
  const std::vector<CurveRow>& rows() const { return rows_; }

 private:
  std::vector<CurveRow> rows_;
};

struct EvalOptions {
  std::size_t threads = 1;
  bool include_lazy = false;
};

namespace detail {

inline void check_budgets(const std::vector<double>& budgets) {
  if (budgets.empty()) throw std::invalid_argument("no budgets given");
  for (double r : budgets) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw std::invalid_argument("budget ratio must be in (0, 1]");
    }
  }
}

inline double measure(const Oracle& oracle, const PatchArray& patches,
                      const PatchSet& visible) {
  return masked_mse(oracle.reconstruct(patches, visible), patches, visible);
}

// One greedy trace at the largest budget, measured at every budget prefix.
inline void kpp_rows(const CorpusImage& img, const PatchArray& patches,
                     const Oracle& oracle, const std::vector<double>& budgets,
                     const InitPolicy& init, bool lazy, std::size_t threads,
                     std::vector<CurveRow>& rows) {
  const std::size_t n = patches.n_patches();
  const double max_ratio = *std::max_element(budgets.begin(), budgets.end());
  const Budget full = resolve_budget(max_ratio, n);
  const SelectorOptions opts{threads};
  const SelectionTrace trace = lazy ? lazy_greedy(oracle, patches, full, init, opts)
                                    : kpp_greedy(oracle, patches, full, init, opts);
  for (double r : budgets) {
    const Budget b = resolve_budget(r, n);
    rows.push_back({img.id, lazy ? "kpp_lazy" : "kpp", oracle.id(), init.name(), r,
                    b.n_keep, std::nullopt,
                    measure(oracle, patches, trace.prefix(b.n_keep))});
  }
}

template <class PerImage>
std::vector<CurveRow> run_corpus(const std::vector<CorpusImage>& corpus,
                                 const GridSpec& grid, PerImage&& per_image) {
  std::vector<CurveRow> rows;
  for (const auto& img : corpus) {
    const PatchArray patches = split(img.image, grid);
    std::vector<CurveRow> image_rows;
    try {
      per_image(img, patches, image_rows);
    } catch (const std::exception& e) {
      std::sort(rows.begin(), rows.end(), row_order);
      throw PartialRunError("image " + img.id + ": " + e.what(), std::move(rows));
    }
    rows.insert(rows.end(), image_rows.begin(), image_rows.end());
  }
  std::sort(rows.begin(), rows.end(), row_order);
  return rows;
}

}  // namespace detail

inline std::vector<CurveRow> evaluate_curves(const std::vector<CorpusImage>& corpus,
                                             const GridSpec& grid, const Oracle& oracle,
                                             const std::vector<double>& budgets,
                                             const std::vector<std::uint64_t>& seeds,
                                             const InitPolicy& init,
                                             const EvalOptions& options = {}) {
  detail::check_budgets(budgets);
  return detail::run_corpus(corpus, grid, [&](const CorpusImage& img,
                                              const PatchArray& patches,
                                              std::vector<CurveRow>& rows) {
    detail::kpp_rows(img, patches, oracle, budgets, init, false, options.threads, rows);
    if (options.include_lazy) {
      detail::kpp_rows(img, patches, oracle, budgets, init, true, options.threads, rows);
    }
    const std::size_t n = patches.n_patches();
    for (double r : budgets) {
      const Budget b = resolve_budget(r, n);
      for (std::uint64_t seed : seeds) {
        const PatchSet visible = random_select(n, b, seed, init);
        rows.push_back({img.id, "random", oracle.id(), init.name(), r, b.n_keep, seed,
                        detail::measure(oracle, patches, visible)});
      }
    }
  });
}

// Greedy with the central initial patch versus none, per image and budget.
inline std::vector<CurveRow> ablate_init(const std::vector<CorpusImage>& corpus,
                                         const GridSpec& grid, const Oracle& oracle,
                                         const std::vector<double>& budgets,
                                         const EvalOptions& options = {}) {
  detail::check_budgets(budgets);
  return detail::run_corpus(corpus, grid, [&](const CorpusImage& img,
                                              const PatchArray& patches,
                                              std::vector<CurveRow>& rows) {
    for (const InitPolicy& init : {InitPolicy::central(), InitPolicy::none()}) {
      detail::kpp_rows(img, patches, oracle, budgets, init, false, options.threads, rows);
    }
  });
}

// Mean masked_mse per series (method, or method/init when inits differ)
// and budget.
struct SeriesPoint {
  double budget_ratio;
  double mean_masked_mse;
  std::size_t samples;
};

inline std::map<std::string, std::vector<SeriesPoint>> summarize(
    const std::vector<CurveRow>& rows) {
  bool mixed_init = false;
  for (const auto& r : rows) mixed_init |= r.init_policy != rows.front().init_policy;
  std::map<std::string, std::map<double, std::pair<double, std::size_t>>> acc;
  for (const auto& r : rows) {
    const std::string key = mixed_init ? r.method + "/" + r.init_policy : r.method;
    auto& cell = acc[key][r.budget_ratio];
    cell.first += r.masked_mse;
    ++cell.second;
  }
  std::map<std::string, std::vector<SeriesPoint>> out;
  for (const auto& [key, by_budget] : acc) {
    for (const auto& [budget, cell] : by_budget) {
      out[key].push_back({budget, cell.first / cell.second, cell.second});
    }
  }
  return out;
}

struct AblationLine {
  double budget_ratio;
  double mean_central;
  double mean_none;
};

inline std::vector<AblationLine> summarize_ablation(const std::vector<CurveRow>& rows) {
  const auto series = summarize(rows);
  const auto c = series.find("kpp/central");
  const auto n = series.find("kpp/none");
  std::vector<AblationLine> out;
  if (c == series.end() || n == series.end()) return out;
  for (std::size_t i = 0; i < c->second.size() && i < n->second.size(); ++i) {
    out.push_back({c->second[i].budget_ratio, c->second[i].mean_masked_mse,
                   n->second[i].mean_masked_mse});
  }
  return out;
}

// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_csv(std::ostream& os, const std::vector<CurveRow>& rows) {
  os << kCsvVersionLine << '\n' << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.image_id << ',' << r.method << ',' << r.oracle_id << ','
       << r.init_policy << ',' << format_number(r.budget_ratio) << ',' << r.n_keep
       << ',' << (r.seed ? std::to_string(*r.seed) : "") << ','
       << format_number(r.masked_mse) << '\n';
  }
}

inline void write_csv_file(const std::filesystem::path& path,
                           const std::vector<CurveRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV: " + path.string());
  write_csv(out, rows);
  if (!out) throw IoError("failed writing CSV: " + path.string());
}

// Self-contained SVG with one polyline per series of per-budget means.
inline std::string render_curves_svg(const std::vector<CurveRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("render_curves_svg: no rows");
  const auto series = summarize(rows);
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 70, kRight = 150, kTop = 30, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  double x_max = 0.0, y_max = 0.0;
  for (const auto& [_, pts] : series) {
    for (const auto& p : pts) {
      x_max = std::max(x_max, p.budget_ratio);
      y_max = std::max(y_max, p.mean_masked_mse);
    }
  }
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.05;
  auto px = [&](double x) { return kLeft + plot_w * x / x_max; };
  auto py = [&](double y) { return kTop + plot_h * (1.0 - y / y_max); };
  auto f2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto f4 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(kTop + plot_h) << "\" x2=\""
     << f2(kLeft + plot_w) << "\" y2=\"" << f2(kTop + plot_h) << "\"/>\n";
  os << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(kTop) << "\" x2=\"" << f2(kLeft)
     << "\" y2=\"" << f2(kTop + plot_h) << "\"/>\n</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_max * i / 4.0, yv = y_max * i / 4.0;
    os << "<text x=\"" << f2(px(xv)) << "\" y=\"" << f2(kTop + plot_h + 15)
       << "\" text-anchor=\"middle\">" << f4(xv) << "</text>\n";
    os << "<text x=\"" << f2(kLeft - 6) << "\" y=\"" << f2(py(yv) + 4)
       << "\" text-anchor=\"end\">" << f4(yv) << "</text>\n";
  }
  os << "<text x=\"" << f2(kLeft + plot_w / 2) << "\" y=\"" << f2(kHeight - 12)
     << "\" text-anchor=\"middle\">selection ratio</text>\n";
  os << "<text x=\"16\" y=\"" << f2(kTop + plot_h / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << f2(kTop + plot_h / 2)
     << ")\">masked MSE</text>\n</g>\n";

  std::size_t k = 0;
  for (const auto& [name, pts] : series) {
    const char* color = kColors[k % std::size(kColors)];
    os << "<g class=\"series\" data-name=\"" << name << "\">\n<polyline fill=\"none\" stroke=\""
       << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) os << ' ';
      os << f2(px(pts[i].budget_ratio)) << ',' << f2(py(pts[i].mean_masked_mse));
    }
    os << "\"/>\n";
    for (const auto& p : pts) {
      os << "<circle cx=\"" << f2(px(p.budget_ratio)) << "\" cy=\""
         << f2(py(p.mean_masked_mse)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * k;
    os << "<line x1=\"" << f2(kWidth - kRight + 15) << "\" y1=\"" << f2(ly) << "\" x2=\""
       << f2(kWidth - kRight + 35) << "\" y2=\"" << f2(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << f2(kWidth - kRight + 40) << "\" y=\"" << f2(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n</g>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

inline void render_curves_svg(const std::vector<CurveRow>& rows,
                              const std::filesystem::path& path) {
  const std::string svg = render_curves_svg(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write SVG: " + path.string());
  out << svg;
  if (!out) throw IoError("failed writing SVG: " + path.string());
}

}  // namespace kpp::harness

#endif  // KPP_HARNESS_HPP_
