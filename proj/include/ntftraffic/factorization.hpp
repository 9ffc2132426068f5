#pragma once

// Nonnegative CP factorization of 3-way tensors and nonnegative matrix
// factorization, both by alternating multiplicative updates on the squared
// Frobenius objective.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ntftraffic/tensor.hpp"

namespace ntftraffic {

struct FactorizationOptions {
  Index rank = 10;
  int max_sweeps = 2000;
  double rel_tol = 1e-8;
  double epsilon = 1e-12;
  std::uint64_t seed = 0;
  int restarts = 1;

  void validate() const {
    if (rank < 1) throw ParameterError("rank must be >= 1, got " + std::to_string(rank));
    if (max_sweeps < 1) throw ParameterError("max_sweeps must be >= 1");
    if (!(rel_tol > 0.0)) throw ParameterError("rel_tol must be > 0");
    if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
    if (restarts < 1) throw ParameterError("restarts must be >= 1");
  }
};

struct FactorizationReport {
  double final_objective = 0.0;
  int sweeps_run = 0;
  std::vector<double> objective_trace;
  bool converged = false;
};

/// Rank used for clustering runs.
inline constexpr Index kClusteringRank = 10;
/// Rank used for prediction runs.
inline constexpr Index kPredictionRank = 50;

namespace detail {

inline Matrix random_factor(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  Matrix out(rows, cols);
  // Fill in storage order so the draw sequence is fixed.
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) out(r, c) = dist(rng);
  return out;
}

inline void multiplicative_step(Matrix& factor, const Matrix& numerator, const Matrix& denominator,
                                double epsilon) {
  factor.array() *= numerator.array() / (denominator.array() + epsilon);
}

inline bool relative_change_below(double previous, double current, double tol) {
  return std::abs(previous - current) / std::max(previous, 1e-30) < tol;
}

struct CPRun {
  CPModel model;
  FactorizationReport report;
};

inline double cp_objective(const Eigen::Map<const Matrix>& unfolded, const CPModel& model) {
  return (unfolded - model.U * khatri_rao(model.V, model.Q).transpose()).squaredNorm();
}

inline CPRun run_cp_updates(const DenseTensor3& t, CPModel model, const FactorizationOptions& opts) {
  const auto unfolded = t.unfolding();
  const Index m = t.m(), l = t.l(), r = model.rank();
  CPRun run;
  double previous = cp_objective(unfolded, model);
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    // U: mode-1 unfolding against the Khatri-Rao combination of V and Q.
    {
      const Matrix kr = khatri_rao(model.V, model.Q);
      const Matrix gram = (model.V.transpose() * model.V).cwiseProduct(model.Q.transpose() * model.Q);
      multiplicative_step(model.U, unfolded * kr, model.U * gram, opts.epsilon);
    }
    // T_(1)^T U serves both the V and the Q numerators.
    const Matrix projected = unfolded.transpose() * model.U;
    {
      Matrix numerator = Matrix::Zero(m, r);
      for (Index k = 0; k < l; ++k)
        numerator.array() += projected.middleRows(k * m, m).array().rowwise() * model.Q.row(k).array();
      const Matrix gram = (model.U.transpose() * model.U).cwiseProduct(model.Q.transpose() * model.Q);
      multiplicative_step(model.V, numerator, model.V * gram, opts.epsilon);
    }
    {
      Matrix numerator(l, r);
      for (Index k = 0; k < l; ++k)
        numerator.row(k) = projected.middleRows(k * m, m).cwiseProduct(model.V).colwise().sum();
      const Matrix gram = (model.U.transpose() * model.U).cwiseProduct(model.V.transpose() * model.V);
      multiplicative_step(model.Q, numerator, model.Q * gram, opts.epsilon);
    }
    const double current = cp_objective(unfolded, model);
    run.report.objective_trace.push_back(current);
    run.report.sweeps_run = sweep + 1;
    const bool done = relative_change_below(previous, current, opts.rel_tol);
    previous = current;
    if (done) {
      run.report.converged = true;
      break;
    }
  }
  run.report.final_objective = previous;
  run.model = std::move(model);
  return run;
}

}  // namespace detail

/// Rescales every nonzero column of U and V to unit L2 norm and moves the
/// removed scale into the matching column of Q. Zero columns pass through.
inline CPModel normalize_model(CPModel model) {
  model.check_consistent();
  for (Index c = 0; c < model.rank(); ++c) {
    const double nu = model.U.col(c).norm();
    if (nu > 0.0) {
      model.U.col(c) /= nu;
      model.Q.col(c) *= nu;
    }
    const double nv = model.V.col(c).norm();
    if (nv > 0.0) {
      model.V.col(c) /= nv;
      model.Q.col(c) *= nv;
    }
  }
  return model;
}

/// ‖T − cp_reconstruct(model)‖²_Fro.
inline double fit_error(const DenseTensor3& t, const CPModel& model) {
  model.check_consistent();
  if (model.n() != t.n() || model.m() != t.m() || model.l() != t.l())
    throw ShapeError("model " + std::to_string(model.n()) + "x" + std::to_string(model.m()) + "x" +
                     std::to_string(model.l()) + " does not match tensor " + std::to_string(t.n()) + "x" +
                     std::to_string(t.m()) + "x" + std::to_string(t.l()));
  double sum = 0.0;
  for (Index k = 0; k < t.l(); ++k)
    sum += (t.slice_view(k) - slice_reconstruct(model, model.Q.row(k).transpose())).squaredNorm();
  return sum;
}

/// Nonnegative CP decomposition by alternating multiplicative updates.
/// Each restart draws fresh factors uniformly from [0.1, 1]; the restart with
/// the lowest final objective wins (earliest on ties). The returned model is
/// normalized, the report belongs to the winning restart.
inline std::pair<CPModel, FactorizationReport> ntf_decompose(const DenseTensor3& t,
                                                             const FactorizationOptions& opts) {
  opts.validate();
  if (t.size() == 0) throw ShapeError("cannot factorize an empty tensor");
  const Index n = t.n(), m = t.m(), l = t.l();
  if (opts.rank > n * m || opts.rank > n * l || opts.rank > m * l)
    throw ParameterError("rank " + std::to_string(opts.rank) + " exceeds the sanity bound for a " +
                         std::to_string(n) + "x" + std::to_string(m) + "x" + std::to_string(l) + " tensor");
  if ((t.unfolding().array() < 0.0).any()) throw DomainError("tensor has negative entries");

  std::mt19937_64 rng(opts.seed);
  detail::CPRun best;
  bool have_best = false;
  for (int attempt = 0; attempt < opts.restarts; ++attempt) {
    CPModel init;
    init.U = detail::random_factor(n, opts.rank, rng);
    init.V = detail::random_factor(m, opts.rank, rng);
    init.Q = detail::random_factor(l, opts.rank, rng);
    detail::CPRun run = detail::run_cp_updates(t, std::move(init), opts);
    if (!have_best || run.report.final_objective < best.report.final_objective) {
      best = std::move(run);
      have_best = true;
    }
  }
  return {normalize_model(std::move(best.model)), std::move(best.report)};
}

struct NMFResult {
  Matrix U;  ///< n x r
  Matrix V;  ///< m x r
  FactorizationReport report;
};

/// A ≈ U V^T with U, V ≥ 0 by Lee-Seung multiplicative updates.
inline NMFResult nmf_decompose(const Matrix& a, const FactorizationOptions& opts) {
  opts.validate();
  if (a.size() == 0) throw ShapeError("cannot factorize an empty matrix");
  if ((a.array() < 0.0).any()) throw DomainError("matrix has negative entries");
  const Index n = a.rows(), m = a.cols();
  if (opts.rank > n * m) throw ParameterError("rank " + std::to_string(opts.rank) + " exceeds n*m");

  std::mt19937_64 rng(opts.seed);
  NMFResult best;
  bool have_best = false;
  for (int attempt = 0; attempt < opts.restarts; ++attempt) {
    NMFResult run;
    run.U = detail::random_factor(n, opts.rank, rng);
    run.V = detail::random_factor(m, opts.rank, rng);
    double previous = (a - run.U * run.V.transpose()).squaredNorm();
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      detail::multiplicative_step(run.U, a * run.V, run.U * (run.V.transpose() * run.V), opts.epsilon);
      detail::multiplicative_step(run.V, a.transpose() * run.U, run.V * (run.U.transpose() * run.U),
                                  opts.epsilon);
      const double current = (a - run.U * run.V.transpose()).squaredNorm();
      run.report.objective_trace.push_back(current);
      run.report.sweeps_run = sweep + 1;
      const bool done = detail::relative_change_below(previous, current, opts.rel_tol);
      previous = current;
      if (done) {
        run.report.converged = true;
        break;
      }
    }
    run.report.final_objective = previous;
    if (!have_best || run.report.final_objective < best.report.final_objective) {
      best = std::move(run);
      have_best = true;
    }
  }
  return best;
}

}  // namespace ntftraffic
