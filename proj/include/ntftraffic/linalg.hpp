#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ntftraffic/tensor.hpp"

namespace ntftraffic {

struct SymmetricEigen {
  Vector values;   ///< descending
  Matrix vectors;  ///< column c pairs with values(c)
  int sweeps = 0;
};

/// Cyclic Jacobi eigenvalue algorithm for a dense symmetric matrix.
/// Converges when the off-diagonal Frobenius norm drops below
/// tol * ‖A‖_F; throws NumericalError after max_sweeps otherwise.
inline SymmetricEigen symmetric_eigen_jacobi(Matrix a, double tol = 1e-14, int max_sweeps = 100) {
  if (a.rows() != a.cols()) throw ShapeError("eigensolver needs a square matrix");
  if (!a.isApprox(a.transpose(), 1e-10) && a.norm() > 0.0) throw DomainError("eigensolver needs a symmetric matrix");
  const Index n = a.rows();
  Matrix vecs = Matrix::Identity(n, n);
  const double scale = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Index q = 1; q < n; ++q)
      for (Index p = 0; p < q; ++p) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  int sweep = 0;
  double off = off_norm();
  while (off > tol * scale && off > 0.0) {
    if (sweep == max_sweeps)
      throw NumericalError("Jacobi eigensolver did not converge: off-diagonal norm " + std::to_string(off) +
                           " (matrix norm " + std::to_string(scale) + ") after " + std::to_string(sweep) +
                           " sweeps on a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the (p, q) rotation.
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = vecs(k, p), vkq = vecs(k, q);
          vecs(k, p) = c * vkp - s * vkq;
          vecs(k, q) = s * vkp + c * vkq;
        }
      }
    }
    ++sweep;
    off = off_norm();
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index c = 0; c < n; ++c) {
    out.values(c) = a(order[c], order[c]);
    out.vectors.col(c) = vecs.col(order[c]);
  }
  out.sweeps = sweep;
  return out;
}

}  // namespace ntftraffic
