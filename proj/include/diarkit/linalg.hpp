// diarkit/linalg.hpp
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

#ifndef DIARKIT_LINALG_HPP
#define DIARKIT_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "diarkit/common.hpp"
#include "diarkit/matrix.hpp"

namespace diarkit {

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Rotations are applied
/// until the off-diagonal Frobenius mass drops below tol * ||A||_F (or the
/// sweep cap is hit, which throws). Eigenpairs come back sorted ascending
/// with a deterministic sign convention: the largest-magnitude component of
/// each eigenvector is positive.
inline EigenDecomposition jacobi_eigen(const Matrix& input, double tol = 1e-14,
                                       int max_sweeps = 100) {
  const std::size_t n = input.rows();
  if (n != input.cols()) throw ContractError("jacobi_eigen: matrix not square");
  if (max_abs_diff(input, transpose(input)) > 1e-9 * (1.0 + frobenius_norm(input)))
    throw ContractError("jacobi_eigen: matrix not symmetric");

  Matrix a = input;
  // symmetrize exactly so rotations stay consistent
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }

  Matrix v = Matrix::identity(n);
  const double norm = frobenius_norm(a);
  const double threshold = tol * (norm > 0.0 ? norm : 1.0);

  auto off_diag_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  int sweep = 0;
  while (off_diag_norm() > threshold) {
    if (++sweep > max_sweeps)
      throw NumericalError("jacobi_eigen: no convergence within sweep cap");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        // smaller-angle root, numerically stable form
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = akp - s * (akq + tau * akp);
          a(p, k) = a(k, p);
          a(k, q) = akq + s * (akp - tau * akq);
          a(q, k) = a(k, q);
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::fabs(v(i, order[j]));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    const double sign = v(arg, order[j]) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = sign * v(i, order[j]);
  }
  return out;
}

/// max_j ||A v_j - lambda_j v_j||_2 over all eigenpairs.
inline double eigen_residual(const Matrix& a, const EigenDecomposition& eig) {
  const std::size_t n = a.rows();
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double av = 0.0;
      for (std::size_t k = 0; k < n; ++k) av += a(i, k) * eig.eigenvectors(k, j);
      const double r = av - eig.eigenvalues[j] * eig.eigenvectors(i, j);
      norm2 += r * r;
    }
    worst = std::max(worst, std::sqrt(norm2));
  }
  return worst;
}

/// B = f(A) for symmetric A via eigendecomposition: B = V f(D) V^T.
template <typename Fn>
inline Matrix symmetric_function(const EigenDecomposition& eig, Fn&& fn) {
  const std::size_t n = eig.eigenvectors.rows();
  Matrix out(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double fv = fn(eig.eigenvalues[j]);
    if (fv == 0.0) continue;
    for (std::size_t r = 0; r < n; ++r) {
      const double vr = eig.eigenvectors(r, j) * fv;
      if (vr == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) out(r, c) += vr * eig.eigenvectors(c, j);
    }
  }
  // exact symmetry for downstream checks
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = r + 1; c < n; ++c) {
      const double v = 0.5 * (out(r, c) + out(c, r));
      out(r, c) = v;
      out(c, r) = v;
    }
  return out;
}

struct SymmetricInverse {
  Matrix inverse;
  double log_det = 0.0;
};

/// Inverse and log-determinant of a symmetric positive definite matrix.
inline SymmetricInverse spd_inverse(const Matrix& a, const char* what) {
  EigenDecomposition eig = jacobi_eigen(a);
  SymmetricInverse out;
  out.log_det = 0.0;
  for (double ev : eig.eigenvalues) {
    if (ev <= 0.0)
      throw NumericalError(format("%s: matrix not positive definite (eigenvalue %g)",
                                  what, ev));
    out.log_det += std::log(ev);
  }
  out.inverse = symmetric_function(eig, [](double ev) { return 1.0 / ev; });
  return out;
}

/// Clip negative eigenvalues to zero (PSD flooring).
inline Matrix psd_floor(const Matrix& a) {
  EigenDecomposition eig = jacobi_eigen(a);
  return symmetric_function(eig, [](double ev) { return ev > 0.0 ? ev : 0.0; });
}

inline double quadratic_form(const Matrix& m, const std::vector<double>& x) {
  if (m.rows() != x.size() || m.cols() != x.size())
    throw ContractError("quadratic_form dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    s += x[i] * dot(m.row(i), x.data(), x.size());
  }
  return s;
}

}  // namespace diarkit

#endif  // DIARKIT_LINALG_HPP
