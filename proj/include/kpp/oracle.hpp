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

// Reconstruction oracles and the two reconstruction losses.
//
// An oracle sees the full ground-truth PatchArray plus the visible
// (unmasked) set, and must predict every masked patch from visible content
// only. Losses live in [0,1] pixel space and average over pixels and
// channels.

#ifndef KPP_ORACLE_HPP_
#define KPP_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpp/patch_grid.hpp"
#include "kpp/patch_set.hpp"

namespace kpp {

struct Reconstruction {
  // Predicted patches in grid order (assemble() gives the image). Empty when
  // the oracle reports only errors, as remote oracles do.
  PatchArray predicted;
  // Mean squared error of each patch against the truth.
  std::vector<double> per_patch_sq_err;

  bool has_prediction() const { return predicted.n_patches() > 0; }
};

namespace detail {

inline void check_shapes(const Reconstruction& recon, const PatchArray& truth,
                         const char* what) {
  if (recon.per_patch_sq_err.size() != truth.n_patches() ||
      (recon.has_prediction() && !recon.predicted.same_shape(truth))) {
    throw std::invalid_argument(std::string(what) +
                                ": reconstruction shape does not match truth");
  }
}

inline double patch_sq_sum(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline std::vector<double> per_patch_errors(const PatchArray& predicted,
                                            const PatchArray& truth) {
  std::vector<double> err(truth.n_patches());
  const double denom = static_cast<double>(truth.patch_size());
  for (PatchIndex k = 0; k < truth.n_patches(); ++k) {
    err[k] = patch_sq_sum(predicted.patch(k), truth.patch(k)) / denom;
  }
  return err;
}

inline std::size_t grid_side_of(const PatchArray& patches) {
  const auto g = static_cast<std::size_t>(
      std::llround(std::sqrt(static_cast<double>(patches.n_patches()))));
  if (g * g != patches.n_patches()) {
    throw std::invalid_argument("patch count " +
                                std::to_string(patches.n_patches()) +
                                " is not a square grid");
  }
  return g;
}

// Gram matrix of patch vectors, row-major n x n.
inline std::vector<double> patch_gram(const PatchArray& truth) {
  const std::size_t n = truth.n_patches();
  std::vector<double> gram(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    auto pa = truth.patch(a);
    for (std::size_t b = a; b < n; ++b) {
      auto pb = truth.patch(b);
      double s = 0.0;
      for (std::size_t i = 0; i < pa.size(); ++i) s += pa[i] * pb[i];
      gram[a * n + b] = s;
      gram[b * n + a] = s;
    }
  }
  return gram;
}

}  // namespace detail

// Mean squared pixel error over masked patches only; 0 if nothing is masked.
inline double masked_mse(const Reconstruction& recon, const PatchArray& truth,
                         const PatchSet& unmasked) {
  detail::check_shapes(recon, truth, "masked_mse");
  if (unmasked.universe() != truth.n_patches()) {
    throw std::invalid_argument("masked_mse: unmasked set universe mismatch");
  }
  std::size_t n_masked = 0;
  double sum = 0.0;
  for (PatchIndex k = 0; k < truth.n_patches(); ++k) {
    if (unmasked.contains(k)) continue;
    ++n_masked;
    if (recon.has_prediction()) {
      sum += detail::patch_sq_sum(recon.predicted.patch(k), truth.patch(k));
    } else {
      sum += recon.per_patch_sq_err[k] * static_cast<double>(truth.patch_size());
    }
  }
  if (n_masked == 0) return 0.0;
  return sum / (static_cast<double>(n_masked) * truth.patch_size());
}

// Mean squared pixel error over the whole image.
inline double full_mse(const Reconstruction& recon, const PatchArray& truth) {
  detail::check_shapes(recon, truth, "full_mse");
  double sum = 0.0;
  for (PatchIndex k = 0; k < truth.n_patches(); ++k) {
    if (recon.has_prediction()) {
      sum += detail::patch_sq_sum(recon.predicted.patch(k), truth.patch(k));
    } else {
      sum += recon.per_patch_sq_err[k] * static_cast<double>(truth.patch_size());
    }
  }
  return sum / (static_cast<double>(truth.n_patches()) * truth.patch_size());
}

// Error of predicting all zeros: the reconstruction with nothing visible.
inline double zero_prediction_mse(const PatchArray& truth) {
  double sum = 0.0;
  for (double v : truth.data()) sum += v * v;
  return truth.data().empty() ? 0.0 : sum / truth.data().size();
}

struct CandidateLoss {
  double masked = 0.0;
  double full = 0.0;
};

// Incremental loss evaluation for greedy sweeps. Holds a committed visible
// set S; evaluate(p) returns the losses of S ∪ {p}. evaluate() must be safe
// to call concurrently; commit() is not.
class SweepScorer {
 public:
  virtual ~SweepScorer() = default;
  virtual CandidateLoss evaluate(PatchIndex p) const = 0;
  // Losses of S itself; for S = ∅ the zero prediction is used.
  virtual CandidateLoss evaluate_current() const = 0;
  virtual void commit(PatchIndex p) = 0;
  virtual const PatchSet& current() const = 0;
};

class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual std::string id() const = 0;
  // Visible patches reappear verbatim in the prediction.
  virtual bool pass_through() const = 0;
  virtual Reconstruction reconstruct(const PatchArray& truth,
                                     const PatchSet& unmasked) const = 0;

  // Default: one reconstruct() per evaluation.
  virtual std::unique_ptr<SweepScorer> make_scorer(const PatchArray& truth) const;
};

class ReconstructingScorer final : public SweepScorer {
 public:
  ReconstructingScorer(const Oracle& oracle, const PatchArray& truth)
      : oracle_(oracle), truth_(truth), set_(truth.n_patches()) {}

  CandidateLoss evaluate(PatchIndex p) const override {
    return losses_of(set_.with(p));
  }

  CandidateLoss evaluate_current() const override {
    if (set_.empty()) {
      const double z = zero_prediction_mse(truth_);
      return {z, z};
    }
    return losses_of(set_);
  }

  void commit(PatchIndex p) override { set_.insert(p); }
  const PatchSet& current() const override { return set_; }

 private:
  CandidateLoss losses_of(const PatchSet& s) const {
    const Reconstruction r = oracle_.reconstruct(truth_, s);
    return {masked_mse(r, truth_, s), full_mse(r, truth_)};
  }

  const Oracle& oracle_;
  const PatchArray& truth_;
  PatchSet set_;
};

inline std::unique_ptr<SweepScorer> Oracle::make_scorer(
    const PatchArray& truth) const {
  return std::make_unique<ReconstructingScorer>(*this, truth);
}

namespace detail {

// Shared bookkeeping for the closed-form scorers of linear pass-through
// oracles: each masked patch g is predicted as a weighted combination of
// visible patches, so its squared error expands into Gram-matrix terms.
class GramScorerBase : public SweepScorer {
 public:
  explicit GramScorerBase(const PatchArray& truth)
      : n_(truth.n_patches()), dim_(static_cast<double>(truth.patch_size())),
        gram_(patch_gram(truth)), set_(truth.n_patches()),
        zero_mse_(zero_prediction_mse(truth)) {}

  CandidateLoss evaluate_current() const override {
    if (set_.empty()) return {zero_mse_, zero_mse_};
    double sum = 0.0;
    for (PatchIndex g = 0; g < n_; ++g) {
      if (!set_.contains(g)) sum += std::max(0.0, current_sq_sum(g));
    }
    return to_losses(sum, n_ - set_.size());
  }

  CandidateLoss evaluate(PatchIndex p) const override {
    double sum = 0.0;
    for (PatchIndex g = 0; g < n_; ++g) {
      if (g == p || set_.contains(g)) continue;
      sum += std::max(0.0, candidate_sq_sum(g, p));
    }
    return to_losses(sum, n_ - set_.size() - 1);
  }

  const PatchSet& current() const override { return set_; }

 protected:
  double gram(std::size_t a, std::size_t b) const { return gram_[a * n_ + b]; }

  // Squared-error sum of masked patch g given the committed set.
  virtual double current_sq_sum(PatchIndex g) const = 0;
  // Squared-error sum of masked patch g once p is also visible.
  virtual double candidate_sq_sum(PatchIndex g, PatchIndex p) const = 0;

  std::size_t n_;
  double dim_;
  std::vector<double> gram_;
  PatchSet set_;

 private:
  CandidateLoss to_losses(double sum, std::size_t n_masked) const {
    CandidateLoss out;
    out.full = sum / (static_cast<double>(n_) * dim_);
    out.masked = n_masked == 0 ? 0.0 : sum / (static_cast<double>(n_masked) * dim_);
    return out;
  }

  double zero_mse_;
};

}  // namespace detail

// Every masked patch is predicted as the element-wise mean of the visible
// patches.
class MeanFillOracle final : public Oracle {
 public:
  std::string id() const override { return "meanfill"; }
  bool pass_through() const override { return true; }

  Reconstruction reconstruct(const PatchArray& truth,
                             const PatchSet& unmasked) const override {
    if (unmasked.empty()) {
      throw std::invalid_argument("meanfill: empty unmasked set");
    }
    if (unmasked.universe() != truth.n_patches()) {
      throw std::invalid_argument("meanfill: unmasked set universe mismatch");
    }
    const std::size_t len = truth.patch_size();
    std::vector<double> mean(len, 0.0);
    for (PatchIndex u : unmasked.sorted()) {
      auto src = truth.patch(u);
      for (std::size_t i = 0; i < len; ++i) mean[i] += src[i];
    }
    const double count = static_cast<double>(unmasked.size());
    for (double& v : mean) v /= count;

    Reconstruction r;
    r.predicted = PatchArray(truth.n_patches(), truth.patch_side(), truth.channels());
    for (PatchIndex k = 0; k < truth.n_patches(); ++k) {
      auto dst = r.predicted.patch(k);
      if (unmasked.contains(k)) {
        std::copy(truth.patch(k).begin(), truth.patch(k).end(), dst.begin());
      } else {
        std::copy(mean.begin(), mean.end(), dst.begin());
      }
    }
    r.per_patch_sq_err = detail::per_patch_errors(r.predicted, truth);
    return r;
  }

  std::unique_ptr<SweepScorer> make_scorer(const PatchArray& truth) const override;
};

namespace detail {

// Visible sum V = Σ_S T_u. For p added (k' = |S|+1):
//   |V + T_p − k' T_g|² / k'²
class MeanFillScorer final : public GramScorerBase {
 public:
  explicit MeanFillScorer(const PatchArray& truth)
      : GramScorerBase(truth), v_dot_(n_, 0.0) {}

  void commit(PatchIndex u) override {
    set_.insert(u);
    vv_ += 2.0 * v_dot_[u] + gram(u, u);
    for (PatchIndex q = 0; q < n_; ++q) v_dot_[q] += gram(u, q);
  }

 protected:
  double current_sq_sum(PatchIndex g) const override {
    const double k = static_cast<double>(set_.size());
    return (vv_ - 2.0 * k * v_dot_[g] + k * k * gram(g, g)) / (k * k);
  }

  double candidate_sq_sum(PatchIndex g, PatchIndex p) const override {
    const double k = static_cast<double>(set_.size() + 1);
    const double num = vv_ + 2.0 * v_dot_[p] + gram(p, p) -
                       2.0 * k * (v_dot_[g] + gram(p, g)) + k * k * gram(g, g);
    return num / (k * k);
  }

 private:
  std::vector<double> v_dot_;  // V · T_q
  double vv_ = 0.0;            // |V|²
};

}  // namespace detail

inline std::unique_ptr<SweepScorer> MeanFillOracle::make_scorer(
    const PatchArray& truth) const {
  return std::make_unique<detail::MeanFillScorer>(truth);
}

// Inverse-distance weighting over grid coordinates: masked patch g is
// Σ_u w(g,u)·T_u / Σ_u w(g,u) with w = d(g,u)^(−alpha).
class IdwOracle final : public Oracle {
 public:
  explicit IdwOracle(double alpha = 2.0) : alpha_(alpha) {
    if (!(alpha > 0.0)) {
      throw std::invalid_argument("idw: alpha must be > 0");
    }
  }

  double alpha() const { return alpha_; }

  std::string id() const override {
    std::ostringstream os;
    os << "idw(alpha=" << alpha_ << ")";
    return os.str();
  }
  bool pass_through() const override { return true; }

  // Weight between two distinct grid cells.
  double weight(std::size_t grid_side, PatchIndex a, PatchIndex b) const {
    const double dr = static_cast<double>(a / grid_side) - static_cast<double>(b / grid_side);
    const double dc = static_cast<double>(a % grid_side) - static_cast<double>(b % grid_side);
    return std::pow(std::sqrt(dr * dr + dc * dc), -alpha_);
  }

  Reconstruction reconstruct(const PatchArray& truth,
                             const PatchSet& unmasked) const override {
    if (unmasked.empty()) {
      throw std::invalid_argument("idw: empty unmasked set");
    }
    if (unmasked.universe() != truth.n_patches()) {
      throw std::invalid_argument("idw: unmasked set universe mismatch");
    }
    const std::size_t g_side = detail::grid_side_of(truth);
    const std::size_t len = truth.patch_size();
    const auto visible = unmasked.sorted();

    Reconstruction r;
    r.predicted = PatchArray(truth.n_patches(), truth.patch_side(), truth.channels());
    std::vector<double> acc(len);
    for (PatchIndex k = 0; k < truth.n_patches(); ++k) {
      auto dst = r.predicted.patch(k);
      if (unmasked.contains(k)) {
        std::copy(truth.patch(k).begin(), truth.patch(k).end(), dst.begin());
        continue;
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      for (PatchIndex u : visible) {
        const double w = weight(g_side, k, u);
        total += w;
        auto src = truth.patch(u);
        for (std::size_t i = 0; i < len; ++i) acc[i] += w * src[i];
      }
      for (std::size_t i = 0; i < len; ++i) dst[i] = acc[i] / total;
    }
    r.per_patch_sq_err = detail::per_patch_errors(r.predicted, truth);
    return r;
  }

  std::unique_ptr<SweepScorer> make_scorer(const PatchArray& truth) const override;

 private:
  double alpha_;
};

namespace detail {

// Per masked g: A_g = Σ_S w_gu T_u, D_g = Σ_S w_gu, U_g = A_g − D_g T_g.
// With p added at weight w:
//   (|U_g|² + 2w U_g·(T_p − T_g) + w²|T_p − T_g|²) / (D_g + w)²
// M[g][q] = A_g · T_q and AA[g] = |A_g|² are maintained per commit.
class IdwScorer final : public GramScorerBase {
 public:
  IdwScorer(const IdwOracle& oracle, const PatchArray& truth)
      : GramScorerBase(truth), weights_(n_ * n_, 0.0), den_(n_, 0.0),
        m_(n_ * n_, 0.0), aa_(n_, 0.0) {
    const std::size_t g_side = grid_side_of(truth);
    for (PatchIndex a = 0; a < n_; ++a) {
      for (PatchIndex b = 0; b < n_; ++b) {
        if (a != b) weights_[a * n_ + b] = oracle.weight(g_side, a, b);
      }
    }
  }

  void commit(PatchIndex u) override {
    set_.insert(u);
    for (PatchIndex g = 0; g < n_; ++g) {
      if (set_.contains(g)) continue;
      const double w = weights_[g * n_ + u];
      double* row = &m_[g * n_];
      aa_[g] += 2.0 * w * row[u] + w * w * gram(u, u);
      for (PatchIndex q = 0; q < n_; ++q) row[q] += w * gram(u, q);
      den_[g] += w;
    }
  }

 protected:
  double current_sq_sum(PatchIndex g) const override {
    const double d = den_[g];
    return u_norm2(g) / (d * d);
  }

  double candidate_sq_sum(PatchIndex g, PatchIndex p) const override {
    const double w = weights_[g * n_ + p];
    const double d = den_[g];
    const double* row = &m_[g * n_];
    const double u_dot_b = row[p] - d * gram(g, p) - row[g] + d * gram(g, g);
    const double b_norm2 = gram(p, p) - 2.0 * gram(g, p) + gram(g, g);
    const double denom = d + w;
    return (u_norm2(g) + 2.0 * w * u_dot_b + w * w * b_norm2) / (denom * denom);
  }

 private:
  double u_norm2(PatchIndex g) const {
    const double d = den_[g];
    return aa_[g] - 2.0 * d * m_[g * n_ + g] + d * d * gram(g, g);
  }

  std::vector<double> weights_;
  std::vector<double> den_;
  std::vector<double> m_;
  std::vector<double> aa_;
};

}  // namespace detail

inline std::unique_ptr<SweepScorer> IdwOracle::make_scorer(
    const PatchArray& truth) const {
  return std::make_unique<detail::IdwScorer>(*this, truth);
}

}  // namespace kpp

#endif  // KPP_ORACLE_HPP_
