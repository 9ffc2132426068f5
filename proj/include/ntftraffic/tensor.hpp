#pragma once

// Dense 3-way tensor storage for traffic records (links x time steps x days)
// together with the slicing, masking and CP reconstruction primitives shared
// by every other part of the library.
//
// Storage is column-major with the link index fastest, then time step, then
// sequence: entry (i, j, k) lives at i + n * (j + m * k). A column fiber is
// therefore one contiguous run and each frontal slice is a contiguous n x m
// column-major block that maps directly onto an Eigen matrix.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ntftraffic/errors.hpp"

namespace ntftraffic {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One day's n x m matrix of traffic states.
using SliceMatrix = Eigen::MatrixXd;

namespace detail {

inline std::string dims_string(Index a, Index b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

}  // namespace detail

/// Unconstrained dense n x m x l array. Used for reconstructions, which may
/// leave the [0, 1] range of the traffic index.
class DenseTensor3 {
 public:
  DenseTensor3() = default;

  DenseTensor3(Index n, Index m, Index l) : n_(n), m_(m), l_(l) {
    if (n < 1 || m < 1 || l < 1) throw ShapeError("tensor dimensions must be >= 1");
    values_.assign(static_cast<std::size_t>(n * m * l), 0.0);
  }

  DenseTensor3(Index n, Index m, Index l, std::vector<double> values) : n_(n), m_(m), l_(l) {
    if (n < 1 || m < 1 || l < 1) throw ShapeError("tensor dimensions must be >= 1");
    if (values.size() != static_cast<std::size_t>(n * m * l))
      throw ShapeError("tensor value count " + std::to_string(values.size()) + " does not match " +
                       std::to_string(n) + "x" + std::to_string(m) + "x" + std::to_string(l));
    values_ = std::move(values);
  }

  Index n() const noexcept { return n_; }
  Index m() const noexcept { return m_; }
  Index l() const noexcept { return l_; }
  Index size() const noexcept { return n_ * m_ * l_; }

  double operator()(Index i, Index j, Index k) const noexcept { return values_[offset(i, j, k)]; }
  double& operator()(Index i, Index j, Index k) noexcept { return values_[offset(i, j, k)]; }

  double at(Index i, Index j, Index k) const {
    check_index(i, j, k);
    return (*this)(i, j, k);
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Frontal slice k as a view; no bounds check.
  Eigen::Map<const Matrix> slice_view(Index k) const noexcept {
    return {values_.data() + n_ * m_ * k, n_, m_};
  }
  Eigen::Map<Matrix> slice_view(Index k) noexcept { return {values_.data() + n_ * m_ * k, n_, m_}; }

  /// Mode-1 unfolding, n x (m * l), column index j + m * k.
  Eigen::Map<const Matrix> unfolding() const noexcept { return {values_.data(), n_, m_ * l_}; }

  void check_index(Index i, Index j, Index k) const {
    if (i < 0 || i >= n_ || j < 0 || j >= m_ || k < 0 || k >= l_)
      throw RangeError("index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                       std::to_string(k) + ") outside " + std::to_string(n_) + "x" +
                       std::to_string(m_) + "x" + std::to_string(l_) + " tensor");
  }

  friend bool operator==(const DenseTensor3&, const DenseTensor3&) = default;

 private:
  std::size_t offset(Index i, Index j, Index k) const noexcept {
    return static_cast<std::size_t>(i + n_ * (j + m_ * k));
  }

  Index n_ = 0;
  Index m_ = 0;
  Index l_ = 0;
  std::vector<double> values_;
};

/// Historic traffic record: every entry is a traffic index in [0, 1].
/// Immutable once constructed.
class TrafficTensor {
 public:
  TrafficTensor(Index n, Index m, Index l, std::vector<double> values)
      : TrafficTensor(DenseTensor3(n, m, l, std::move(values))) {}

  explicit TrafficTensor(DenseTensor3 data) : data_(std::move(data)) {
    if (data_.size() == 0) throw ShapeError("traffic tensor must be nonempty");
    const auto v = data_.values();
    for (std::size_t p = 0; p < v.size(); ++p) {
      if (!(v[p] >= 0.0 && v[p] <= 1.0))
        throw DomainError("traffic index " + std::to_string(v[p]) + " at flat offset " +
                          std::to_string(p) + " outside [0, 1]");
    }
  }

  /// Stacks equally sized slices along the sequence way.
  static TrafficTensor from_slices(std::span<const SliceMatrix> slices) {
    if (slices.empty()) throw ShapeError("need at least one slice");
    const Index n = slices.front().rows(), m = slices.front().cols();
    DenseTensor3 t(n, m, static_cast<Index>(slices.size()));
    for (std::size_t k = 0; k < slices.size(); ++k) {
      if (slices[k].rows() != n || slices[k].cols() != m)
        throw ShapeError("slice " + std::to_string(k) + " is " +
                         detail::dims_string(slices[k].rows(), slices[k].cols()) + ", expected " +
                         detail::dims_string(n, m));
      t.slice_view(static_cast<Index>(k)) = slices[k];
    }
    return TrafficTensor(std::move(t));
  }

  Index n() const noexcept { return data_.n(); }
  Index m() const noexcept { return data_.m(); }
  Index l() const noexcept { return data_.l(); }

  double operator()(Index i, Index j, Index k) const noexcept { return data_(i, j, k); }
  double at(Index i, Index j, Index k) const { return data_.at(i, j, k); }
  std::span<const double> values() const noexcept { return data_.values(); }
  Eigen::Map<const Matrix> slice_view(Index k) const noexcept { return data_.slice_view(k); }
  Eigen::Map<const Matrix> unfolding() const noexcept { return data_.unfolding(); }

  const DenseTensor3& dense() const noexcept { return data_; }
  operator const DenseTensor3&() const noexcept { return data_; }

  friend bool operator==(const TrafficTensor&, const TrafficTensor&) = default;

 private:
  DenseTensor3 data_;
};

/// Which entries of an n x m slice carry observations.
class ObservationMask {
 public:
  using Array = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ObservationMask(Array observed) : observed_(std::move(observed)) {
    if (observed_.size() == 0 || observed_.count() == 0)
      throw ParameterError("observation mask must observe at least one entry");
  }

  /// Columns j < m1 fully observed, the rest fully missing.
  static ObservationMask leading_columns(Index n, Index m, Index m1) {
    if (n < 1 || m < 1) throw ShapeError("mask dimensions must be >= 1");
    if (m1 < 1 || m1 > m)
      throw ParameterError("observed step count " + std::to_string(m1) + " outside [1, " +
                           std::to_string(m) + "]");
    Array a = Array::Constant(n, m, false);
    a.leftCols(m1).setConstant(true);
    return ObservationMask(std::move(a));
  }

  static ObservationMask full(Index n, Index m) { return leading_columns(n, m, m); }

  Index rows() const noexcept { return observed_.rows(); }
  Index cols() const noexcept { return observed_.cols(); }
  bool observed(Index i, Index j) const noexcept { return observed_(i, j); }
  Index observed_count() const noexcept { return observed_.count(); }
  Index unobserved_count() const noexcept { return observed_.size() - observed_.count(); }
  const Array& array() const noexcept { return observed_; }

 private:
  Array observed_;
};

/// A rank-one basis matrix u ∘ v with nonnegative factors.
struct BasisElement {
  Vector u;
  Vector v;

  BasisElement(Vector u_in, Vector v_in) : u(std::move(u_in)), v(std::move(v_in)) {
    if ((u.array() < 0.0).any() || (v.array() < 0.0).any())
      throw DomainError("basis element vectors must be nonnegative");
  }
};

/// Rank-r nonnegative CP model: T ≈ Σ_i U(:,i) ∘ V(:,i) ∘ Q(:,i).
struct CPModel {
  Matrix U;  ///< n x r link factors
  Matrix V;  ///< m x r time-step factors
  Matrix Q;  ///< l x r sequence factors (expansion coefficients)

  Index rank() const noexcept { return U.cols(); }
  Index n() const noexcept { return U.rows(); }
  Index m() const noexcept { return V.rows(); }
  Index l() const noexcept { return Q.rows(); }

  void check_consistent() const {
    if (U.cols() < 1 || V.cols() != U.cols() || Q.cols() != U.cols())
      throw ShapeError("factor matrices disagree on rank: U " + detail::dims_string(U.rows(), U.cols()) +
                       ", V " + detail::dims_string(V.rows(), V.cols()) + ", Q " +
                       detail::dims_string(Q.rows(), Q.cols()));
    if (U.rows() < 1 || V.rows() < 1 || Q.rows() < 1) throw ShapeError("factor matrices must be nonempty");
  }

  bool nonnegative() const {
    return (U.array() >= 0.0).all() && (V.array() >= 0.0).all() && (Q.array() >= 0.0).all();
  }
};

inline SliceMatrix frontal_slice(const DenseTensor3& t, Index k) {
  if (k < 0 || k >= t.l())
    throw RangeError("sequence index " + std::to_string(k) + " outside [0, " + std::to_string(t.l()) + ")");
  return t.slice_view(k);
}

/// Network-level traffic state of step j on day k.
inline Vector column_fiber(const DenseTensor3& t, Index j, Index k) {
  if (j < 0 || j >= t.m() || k < 0 || k >= t.l())
    throw RangeError("fiber index (" + std::to_string(j) + "," + std::to_string(k) + ") outside " +
                     detail::dims_string(t.m(), t.l()));
  return t.slice_view(k).col(j);
}

inline SliceMatrix outer_matrix(const BasisElement& b) { return b.u * b.v.transpose(); }

/// Σ over observed entries of (A_ij - B_ij)^2.
inline double masked_frobenius_sq(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b,
                                  const ObservationMask& mask) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != mask.rows() || a.cols() != mask.cols())
    throw ShapeError("masked distance operands " + detail::dims_string(a.rows(), a.cols()) + ", " +
                     detail::dims_string(b.rows(), b.cols()) + ", mask " +
                     detail::dims_string(mask.rows(), mask.cols()));
  double sum = 0.0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (mask.observed(i, j)) {
        const double d = a(i, j) - b(i, j);
        sum += d * d;
      }
  return sum;
}

/// Σ_i coeffs_i · (u^i ∘ v^i).
inline SliceMatrix slice_reconstruct(const CPModel& model, const Eigen::Ref<const Vector>& coeffs) {
  model.check_consistent();
  if (coeffs.size() != model.rank())
    throw ShapeError("coefficient vector has length " + std::to_string(coeffs.size()) + ", model rank is " +
                     std::to_string(model.rank()));
  Matrix scaled_v = model.V * coeffs.asDiagonal();
  return model.U * scaled_v.transpose();
}

/// Full CP reconstruction. Not clamped: entries may exceed 1.
inline DenseTensor3 cp_reconstruct(const CPModel& model) {
  model.check_consistent();
  DenseTensor3 out(model.n(), model.m(), model.l());
  for (Index k = 0; k < model.l(); ++k)
    out.slice_view(k) = slice_reconstruct(model, model.Q.row(k).transpose());
  return out;
}

/// Khatri-Rao combination of V (m x r) and Q (l x r): row j + m * k holds
/// V(j,:) .* Q(k,:), matching the column order of the mode-1 unfolding.
inline Matrix khatri_rao(const Matrix& v, const Matrix& q) {
  const Index m = v.rows(), l = q.rows(), r = v.cols();
  Matrix out(m * l, r);
  for (Index k = 0; k < l; ++k)
    out.middleRows(k * m, m) = v.array().rowwise() * q.row(k).array();
  return out;
}

/// Restriction of a tensor to chosen links, a step window [step_begin,
/// step_end) and chosen sequences, in the order given.
inline DenseTensor3 subtensor(const DenseTensor3& t, std::span<const Index> links, Index step_begin,
                              Index step_end, std::span<const Index> sequences) {
  if (links.empty() || sequences.empty()) throw ShapeError("subtensor needs at least one link and sequence");
  if (step_begin < 0 || step_end > t.m() || step_begin >= step_end)
    throw RangeError("step window [" + std::to_string(step_begin) + ", " + std::to_string(step_end) +
                     ") outside [0, " + std::to_string(t.m()) + ")");
  const Index n = static_cast<Index>(links.size()), m = step_end - step_begin,
              l = static_cast<Index>(sequences.size());
  DenseTensor3 out(n, m, l);
  for (Index k = 0; k < l; ++k)
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i) out(i, j, k) = t.at(links[i], step_begin + j, sequences[k]);
  return out;
}

inline TrafficTensor subtensor(const TrafficTensor& t, std::span<const Index> links, Index step_begin,
                               Index step_end, std::span<const Index> sequences) {
  return TrafficTensor(subtensor(t.dense(), links, step_begin, step_end, sequences));
}

}  // namespace ntftraffic
