// diarkit/plda.hpp
//
// Copyright 2026 The diarkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// LDA dimensionality reduction, closed-form two-covariance PLDA, pairwise
// log-likelihood-ratio scoring and logistic score normalization.

#ifndef DIARKIT_PLDA_HPP
#define DIARKIT_PLDA_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "diarkit/binio.hpp"
#include "diarkit/common.hpp"
#include "diarkit/linalg.hpp"
#include "diarkit/matrix.hpp"
#include "diarkit/similarity.hpp"

namespace diarkit {

struct LdaModel {
  std::vector<double> mean;  // training global mean
  Matrix projection;         // out_dim x in_dim, whitening-constrained

  std::vector<double> apply(const std::vector<double>& x) const {
    if (x.size() != mean.size()) throw ContractError("LdaModel::apply: dim mismatch");
    std::vector<double> centered(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean[i];
    std::vector<double> out(projection.rows());
    for (std::size_t r = 0; r < projection.rows(); ++r)
      out[r] = dot(projection.row(r), centered.data(), centered.size());
    return out;
  }
};

struct PldaModel {
  std::vector<double> mean;   // global mean in model space
  Matrix between;             // Phi_b, PSD
  Matrix within;              // Phi_w, PD after flooring

  // derived scoring terms
  Matrix inv_total;           // (Phi_b + Phi_w)^-1
  Matrix inv_sum;             // (Phi_w + 2 Phi_b)^-1
  Matrix inv_within;          // Phi_w^-1
  double logdet_total = 0.0;
  double logdet_sum = 0.0;
  double logdet_within = 0.0;

  std::size_t dim() const { return mean.size(); }

  void compute_derived() {
    const std::size_t d = dim();
    Matrix total(d, d), sum2(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        total(i, j) = between(i, j) + within(i, j);
        sum2(i, j) = within(i, j) + 2.0 * between(i, j);
      }
    SymmetricInverse t = spd_inverse(total, "plda total covariance");
    SymmetricInverse s = spd_inverse(sum2, "plda sum covariance");
    SymmetricInverse w = spd_inverse(within, "plda within covariance");
    inv_total = std::move(t.inverse);
    inv_sum = std::move(s.inverse);
    inv_within = std::move(w.inverse);
    logdet_total = t.log_det;
    logdet_sum = s.log_det;
    logdet_within = w.log_det;
  }
};

// ---------------------------------------------------------------------------
// LDA
// ---------------------------------------------------------------------------

/// Fisher LDA via the generalized eigenproblem on (S_b, S_w + ridge). The
/// projection whitens the within-class scatter: P S_w P^T = I.
inline LdaModel fit_lda(const std::vector<std::vector<double>>& embeddings,
                        const std::vector<std::string>& labels, int out_dim) {
  if (embeddings.size() != labels.size())
    throw ContractError("fit_lda: embeddings/labels size mismatch");
  if (embeddings.empty()) throw DataError("fit_lda: no data");
  const std::size_t d = embeddings.front().size();

  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
  const std::size_t num_classes = classes.size();
  if (out_dim < 1 || static_cast<std::size_t>(out_dim) > num_classes - 1)
    throw ContractError(format("fit_lda: out_dim %d exceeds classes-1 = %zu", out_dim,
                               num_classes - 1));

  std::vector<double> mean(d, 0.0);
  for (const auto& x : embeddings)
    for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
  for (auto& v : mean) v /= static_cast<double>(embeddings.size());

  Matrix sw(d, d), sb(d, d);
  for (const auto& [label, members] : classes) {
    std::vector<double> cmean(d, 0.0);
    for (std::size_t idx : members)
      for (std::size_t i = 0; i < d; ++i) cmean[i] += embeddings[idx][i];
    for (auto& v : cmean) v /= static_cast<double>(members.size());

    for (std::size_t idx : members)
      for (std::size_t i = 0; i < d; ++i) {
        const double di = embeddings[idx][i] - cmean[i];
        for (std::size_t j = i; j < d; ++j)
          sw(i, j) += di * (embeddings[idx][j] - cmean[j]);
      }
    const double weight = static_cast<double>(members.size());
    for (std::size_t i = 0; i < d; ++i) {
      const double di = cmean[i] - mean[i];
      for (std::size_t j = i; j < d; ++j) sb(i, j) += weight * di * (cmean[j] - mean[j]);
    }
  }
  const double n_total = static_cast<double>(embeddings.size());
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      sw(i, j) /= n_total;
      sb(i, j) /= n_total;
      sw(j, i) = sw(i, j);
      sb(j, i) = sb(i, j);
    }

  // ridge scaled by the within-class trace
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += sw(i, i);
  const double ridge = 1e-6 * std::max(trace / static_cast<double>(d), 1e-12);
  for (std::size_t i = 0; i < d; ++i) sw(i, i) += ridge;

  EigenDecomposition ew = jacobi_eigen(sw);
  for (double ev : ew.eigenvalues)
    if (ev <= 1e-14 * std::max(1.0, ew.eigenvalues.back()))
      throw NumericalError("fit_lda: within-class scatter singular despite flooring");

  // T = Lambda^-1/2 U^T whitens S_w; diagonalize T S_b T^T
  Matrix t(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    const double s = 1.0 / std::sqrt(ew.eigenvalues[r]);
    for (std::size_t c = 0; c < d; ++c) t(r, c) = s * ew.eigenvectors(c, r);
  }
  Matrix m = matmul_nt(matmul(t, sb), t);
  // clean tiny asymmetries before the second eigendecomposition
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  EigenDecomposition eb = jacobi_eigen(m);

  LdaModel model;
  model.mean = mean;
  model.projection = Matrix(static_cast<std::size_t>(out_dim), d);
  for (int r = 0; r < out_dim; ++r) {
    // eigenvalues ascend; take the largest first
    const std::size_t src = d - 1 - static_cast<std::size_t>(r);
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += eb.eigenvectors(k, src) * t(k, c);
      model.projection(static_cast<std::size_t>(r), c) = acc;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// PLDA estimation (closed-form two-covariance model, no EM)
// ---------------------------------------------------------------------------

/// mu = global mean, Phi_w = pooled within-class covariance, Phi_b =
/// covariance of class means minus the Phi_w/n-bar sampling correction,
/// floored to PSD. Classes with one sample are dropped with a warning.
inline PldaModel fit_plda(const std::vector<std::vector<double>>& embeddings,
                          const std::vector<std::string>& labels) {
  if (embeddings.size() != labels.size())
    throw ContractError("fit_plda: embeddings/labels size mismatch");
  if (embeddings.empty()) throw DataError("fit_plda: no data");
  const std::size_t d = embeddings.front().size();

  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);

  std::vector<const std::vector<std::size_t>*> kept;
  for (const auto& [label, members] : classes) {
    if (members.size() < 2) {
      log_warn("fit_plda: dropping class '%s' with a single sample", label.c_str());
      continue;
    }
    kept.push_back(&members);
  }
  if (kept.size() < 2)
    throw DataError("fit_plda: need at least 2 classes with >= 2 samples each");

  std::size_t n_kept = 0;
  for (const auto* members : kept) n_kept += members->size();

  std::vector<double> mean(d, 0.0);
  for (const auto* members : kept)
    for (std::size_t idx : *members)
      for (std::size_t i = 0; i < d; ++i) mean[i] += embeddings[idx][i];
  for (auto& v : mean) v /= static_cast<double>(n_kept);

  Matrix within(d, d);
  Matrix mean_cov(d, d);
  double class_size_sum = 0.0;
  std::vector<std::vector<double>> class_means;
  class_means.reserve(kept.size());
  for (const auto* members : kept) {
    std::vector<double> cmean(d, 0.0);
    for (std::size_t idx : *members)
      for (std::size_t i = 0; i < d; ++i) cmean[i] += embeddings[idx][i];
    for (auto& v : cmean) v /= static_cast<double>(members->size());
    for (std::size_t idx : *members)
      for (std::size_t i = 0; i < d; ++i) {
        const double di = embeddings[idx][i] - cmean[i];
        for (std::size_t j = i; j < d; ++j)
          within(i, j) += di * (embeddings[idx][j] - cmean[j]);
      }
    class_size_sum += static_cast<double>(members->size());
    class_means.push_back(std::move(cmean));
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      within(i, j) /= static_cast<double>(n_kept);
      within(j, i) = within(i, j);
    }

  for (const auto& cmean : class_means)
    for (std::size_t i = 0; i < d; ++i) {
      const double di = cmean[i] - mean[i];
      for (std::size_t j = i; j < d; ++j) mean_cov(i, j) += di * (cmean[j] - mean[j]);
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      mean_cov(i, j) /= static_cast<double>(class_means.size());
      mean_cov(j, i) = mean_cov(i, j);
    }

  // subtract the sampling noise of the class means, then floor to PSD
  const double n_bar = class_size_sum / static_cast<double>(kept.size());
  Matrix between_raw(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      between_raw(i, j) = mean_cov(i, j) - within(i, j) / n_bar;

  PldaModel model;
  model.mean = mean;
  model.between = psd_floor(between_raw);
  model.within = within;
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += within(i, i);
  const double ridge = 1e-6 * std::max(trace / static_cast<double>(d), 1e-12);
  for (std::size_t i = 0; i < d; ++i) model.within(i, i) += ridge;
  model.compute_derived();
  return model;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// log p(x_a, x_b | same speaker) - log p(x_a, x_b | different speakers)
/// under the two-covariance Gaussian model; exactly symmetric in (a, b).
inline double plda_score(const PldaModel& model, const std::vector<double>& a,
                         const std::vector<double>& b) {
  const std::size_t d = model.dim();
  if (a.size() != d || b.size() != d)
    throw ContractError("plda_score: dimension mismatch");

  // sum/difference coordinates block-diagonalize the same-speaker covariance
  static constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
  std::vector<double> u(d), v(d), s(d), w(d);
  for (std::size_t i = 0; i < d; ++i) {
    u[i] = a[i] - model.mean[i];
    v[i] = b[i] - model.mean[i];
    s[i] = (u[i] + v[i]) * kInvSqrt2;
    w[i] = (u[i] - v[i]) * kInvSqrt2;
  }
  const double same = quadratic_form(model.inv_sum, s) +
                      quadratic_form(model.inv_within, w) + model.logdet_sum +
                      model.logdet_within;
  const double diff = quadratic_form(model.inv_total, u) +
                      quadratic_form(model.inv_total, v) + 2.0 * model.logdet_total;
  return 0.5 * (diff - same);
}

/// Eq.-3 style logistic normalization, defined on max-abs rescaled scores.
inline double normalize_score(double x) { return 1.0 / (1.0 + std::exp(-5.0 * x)); }

struct PldaScoreMatrices {
  SimilarityMatrix scaled;      // raw LLRs divided by max |LLR|, in [-1, 1]
  SimilarityMatrix normalized;  // logistic-normalized, in (0, 1)
};

/// All-pairs scoring: raw LLRs are max-abs rescaled to [-1,1], then pushed
/// through the logistic. Both stages are returned; diagonals are set to 1.
/// With rescale = false the logistic is applied to the raw LLRs and the
/// "scaled" matrix carries them unscaled.
inline PldaScoreMatrices score_matrix(const PldaModel& model,
                                      const std::vector<std::vector<double>>& embeddings,
                                      const std::vector<std::string>& ids,
                                      int jobs = 1, bool rescale = true) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw ContractError("score_matrix: need at least 2 embeddings");
  if (ids.size() != n) throw ContractError("score_matrix: ids size mismatch");

  Matrix raw(n, n);
  parallel_for(n, jobs, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j)
      raw(i, j) = plda_score(model, embeddings[i], embeddings[j]);
  });
  double max_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      max_abs = std::max(max_abs, std::fabs(raw(i, j)));
  const double scale = rescale && max_abs > 0.0 ? 1.0 / max_abs : 1.0;

  PldaScoreMatrices out;
  out.scaled.ids = ids;
  out.normalized.ids = ids;
  out.scaled.values = Matrix(n, n);
  out.normalized.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out.scaled.values(i, i) = 1.0;
    out.normalized.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double scaled = raw(i, j) * scale;
      const double norm = normalize_score(scaled);
      out.scaled.values(i, j) = scaled;
      out.scaled.values(j, i) = scaled;
      out.normalized.values(i, j) = norm;
      out.normalized.values(j, i) = norm;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file: magic "DKPL" with dims, mu, Phi_b, Phi_w, LDA matrix (f64).
// ---------------------------------------------------------------------------

struct PldaPipelineModel {
  LdaModel lda;
  PldaModel plda;
};

inline void write_plda_model(const std::string& path, const PldaPipelineModel& m) {
  BinaryWriter w(path);
  w.magic("DKPL");
  w.u32(static_cast<std::uint32_t>(m.lda.mean.size()));
  w.u32(static_cast<std::uint32_t>(m.plda.dim()));
  w.f64_array(m.plda.mean.data(), m.plda.mean.size());
  w.matrix_f64(m.plda.between);
  w.matrix_f64(m.plda.within);
  w.matrix_f64(m.lda.projection);
  w.f64_array(m.lda.mean.data(), m.lda.mean.size());
  w.close();
}

inline PldaPipelineModel read_plda_model(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DKPL");
  const std::uint32_t in_dim = r.u32();
  const std::uint32_t out_dim = r.u32();
  PldaPipelineModel m;
  m.plda.mean.resize(out_dim);
  r.f64_array(m.plda.mean.data(), out_dim);
  m.plda.between = r.matrix_f64();
  m.plda.within = r.matrix_f64();
  m.lda.projection = r.matrix_f64();
  m.lda.mean.resize(in_dim);
  r.f64_array(m.lda.mean.data(), in_dim);
  m.plda.compute_derived();
  return m;
}

}  // namespace diarkit

#endif  // DIARKIT_PLDA_HPP
