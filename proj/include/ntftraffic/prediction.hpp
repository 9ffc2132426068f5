#pragma once

// Long-term prediction of the unobserved steps of a partially observed day.
//
// The day's expansion coefficients q on the learned basis {u^i ∘ v^i} are
// estimated by minimizing
//
//   J(q) = ‖x − B q‖²_obs + λ Σ_j s_j ‖q − Q(h_j,:)‖²,   q ≥ 0,
//
// where B is the (n·m) x r matrix with column i = vec(u^i ∘ v^i), the first
// term runs over observed entries only and h_j are the K nearest historic
// days. The multiplicative update
//
//   q_i ← q_i (Bᵀ W x + λ Σ_j s_j Q(h_j,:))_i / (Bᵀ W B q + λ (Σ_j s_j) q + ε)_i
//
// follows from the KKT conditions of J and never increases it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ntftraffic/factorization.hpp"
#include "ntftraffic/tensor.hpp"

namespace ntftraffic {

struct NeighborSet {
  std::vector<Index> indices;        ///< ascending distance, ties by lower index
  std::vector<double> distances;     ///< masked L2 distances
  std::vector<double> similarities;  ///< in (0, 1]
  double scale = 1.0;                ///< kernel bandwidth used for the similarities
};

struct CompletionOptions {
  double lambda = 1.0;
  Index K = 3;
  int max_iters = 5000;
  double rel_tol = 1e-10;
  double epsilon = 1e-12;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
    if (K < 1) throw ParameterError("K must be >= 1");
    if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
    if (!(rel_tol > 0.0)) throw ParameterError("rel_tol must be > 0");
    if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
  }
};

struct CoefficientEstimate {
  Vector qm;
  std::vector<double> cost_trace;
  bool converged = false;
};

enum class Method { ntf_knn, historic_average, historic_nn };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::ntf_knn: return "ntf_knn";
    case Method::historic_average: return "historic_average";
    case Method::historic_nn: return "historic_nn";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "ntf_knn") return Method::ntf_knn;
  if (s == "historic_average") return Method::historic_average;
  if (s == "historic_nn") return Method::historic_nn;
  return std::nullopt;
}

struct PredictionReport {
  Method method = Method::ntf_knn;
  std::vector<double> per_sequence_error;
  double gpe = 0.0;  ///< General Prediction Error: mean of per_sequence_error
};

/// exp(−d² / (2·scale²)), kept strictly positive.
inline double similarity_from_distance(double d, double scale) {
  if (!(scale > 0.0)) throw ParameterError("similarity scale must be > 0, got " + std::to_string(scale));
  if (!(d >= 0.0)) throw ParameterError("distance must be >= 0");
  return std::max(std::exp(-d * d / (2.0 * scale * scale)), std::numeric_limits<double>::min());
}

/// The K training slices closest to `m` on its observed entries.
inline NeighborSet knn_select(const DenseTensor3& train, const Eigen::Ref<const Matrix>& m,
                              const ObservationMask& mask, Index K) {
  if (K < 1 || K > train.l())
    throw ParameterError("neighbor count " + std::to_string(K) + " outside [1, " + std::to_string(train.l()) +
                         "]");
  if (m.rows() != train.n() || m.cols() != train.m())
    throw ShapeError("slice " + detail::dims_string(m.rows(), m.cols()) + " does not match training slices " +
                     detail::dims_string(train.n(), train.m()));
  std::vector<double> dist(static_cast<std::size_t>(train.l()));
  for (Index k = 0; k < train.l(); ++k) dist[k] = std::sqrt(masked_frobenius_sq(train.slice_view(k), m, mask));
  std::vector<Index> order(dist.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist[a] < dist[b]; });

  NeighborSet out;
  out.indices.assign(order.begin(), order.begin() + K);
  for (Index h : out.indices) out.distances.push_back(dist[h]);
  std::vector<double> sorted = out.distances;
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  out.scale = median > 0.0 ? median : 1.0;
  for (double d : out.distances) out.similarities.push_back(similarity_from_distance(d, out.scale));
  return out;
}

namespace detail {

/// Observed rows of the Khatri-Rao basis and the matching data entries.
struct ObservedSystem {
  Matrix basis;  ///< observed entries x r
  Vector data;
};

inline ObservedSystem observed_system(const Eigen::Ref<const Matrix>& m, const ObservationMask& mask,
                                      const CPModel& model) {
  ObservedSystem sys;
  sys.basis.resize(mask.observed_count(), model.rank());
  sys.data.resize(mask.observed_count());
  Index row = 0;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (mask.observed(i, j)) {
        sys.basis.row(row) = model.U.row(i).cwiseProduct(model.V.row(j));
        sys.data(row) = m(i, j);
        ++row;
      }
  return sys;
}

inline void check_completion_inputs(const Eigen::Ref<const Matrix>& m, const ObservationMask& mask,
                                    const CPModel& model, const NeighborSet& neighbors) {
  model.check_consistent();
  if (m.rows() != model.n() || m.cols() != model.m())
    throw ShapeError("slice " + dims_string(m.rows(), m.cols()) + " does not match model basis " +
                     dims_string(model.n(), model.m()));
  if (mask.rows() != m.rows() || mask.cols() != m.cols()) throw ShapeError("mask does not match slice");
  if (neighbors.indices.empty() || neighbors.indices.size() != neighbors.similarities.size())
    throw ShapeError("neighbor set is empty or inconsistent");
  for (Index h : neighbors.indices)
    if (h < 0 || h >= model.l())
      throw RangeError("neighbor index " + std::to_string(h) + " outside model's " + std::to_string(model.l()) +
                       " sequences");
}

inline double completion_cost(const ObservedSystem& sys, const CPModel& model, const NeighborSet& neighbors,
                              double lambda, const Vector& q) {
  double cost = (sys.data - sys.basis * q).squaredNorm();
  if (lambda > 0.0) {
    double reg = 0.0;
    for (std::size_t j = 0; j < neighbors.indices.size(); ++j)
      reg += neighbors.similarities[j] * (q - model.Q.row(neighbors.indices[j]).transpose()).squaredNorm();
    cost += lambda * reg;
  }
  return cost;
}

inline Vector mean_of_slices_flat(const DenseTensor3& t, std::vector<Index> indices) {
  std::sort(indices.begin(), indices.end());
  Matrix sum = Matrix::Zero(t.n(), t.m());
  for (Index k : indices) sum += t.slice_view(k);
  return Eigen::Map<Vector>(sum.data(), sum.size()) / static_cast<double>(indices.size());
}

/// One multiplicative step on the coefficients. `numerator` is
/// Bᵀ W x + λ Σ s_j Q(h_j,:), `shrink` is λ Σ s_j.
inline void coefficient_update(Vector& q, const Matrix& gram, const Vector& numerator, double shrink,
                               double epsilon) {
  const Vector denominator = gram * q + shrink * q;
  q.array() *= numerator.array() / (denominator.array() + epsilon);
}

}  // namespace detail

/// Value of the completion objective J at q.
inline double completion_cost(const Eigen::Ref<const Matrix>& m, const ObservationMask& mask,
                              const CPModel& model, const NeighborSet& neighbors, double lambda,
                              const Vector& q) {
  detail::check_completion_inputs(m, mask, model, neighbors);
  if (q.size() != model.rank()) throw ShapeError("coefficient vector length does not match model rank");
  return detail::completion_cost(detail::observed_system(m, mask, model), model, neighbors, lambda, q);
}

/// Similarity-weighted mean of the neighbors' coefficient rows.
inline Vector neighbor_mean(const CPModel& model, const NeighborSet& neighbors) {
  Vector sum = Vector::Zero(model.rank());
  double weight = 0.0;
  for (std::size_t j = 0; j < neighbors.indices.size(); ++j) {
    sum += neighbors.similarities[j] * model.Q.row(neighbors.indices[j]).transpose();
    weight += neighbors.similarities[j];
  }
  return sum / weight;
}

/// Nonnegative coefficients of `m` on the model basis, pulled toward the
/// coefficients of its nearest historic neighbors.
inline CoefficientEstimate estimate_coefficients(const Eigen::Ref<const Matrix>& m, const ObservationMask& mask,
                                                 const CPModel& model, const NeighborSet& neighbors,
                                                 const CompletionOptions& opts) {
  opts.validate();
  detail::check_completion_inputs(m, mask, model, neighbors);
  const detail::ObservedSystem sys = detail::observed_system(m, mask, model);
  if (sys.basis.squaredNorm() == 0.0)
    throw DegenerateBasisError("every basis element vanishes on the observed entries");

  const Matrix gram = sys.basis.transpose() * sys.basis;
  const Vector projected = sys.basis.transpose() * sys.data;
  double total_similarity = 0.0;
  Vector weighted = Vector::Zero(model.rank());
  for (std::size_t j = 0; j < neighbors.indices.size(); ++j) {
    total_similarity += neighbors.similarities[j];
    weighted += neighbors.similarities[j] * model.Q.row(neighbors.indices[j]).transpose();
  }
  const Vector numerator = projected + opts.lambda * weighted;

  CoefficientEstimate out;
  Vector q = (weighted / total_similarity).cwiseMax(opts.epsilon);
  double previous = detail::completion_cost(sys, model, neighbors, opts.lambda, q);
  for (int it = 0; it < opts.max_iters; ++it) {
    detail::coefficient_update(q, gram, numerator, opts.lambda * total_similarity, opts.epsilon);
    const double current = detail::completion_cost(sys, model, neighbors, opts.lambda, q);
    out.cost_trace.push_back(current);
    const bool done = detail::relative_change_below(previous, current, opts.rel_tol);
    previous = current;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.qm = std::move(q);
  return out;
}

/// `m` with its unobserved entries replaced by the reconstruction from qm.
inline SliceMatrix predict_missing(const Eigen::Ref<const Matrix>& m, const ObservationMask& mask,
                                   const Vector& qm, const CPModel& model) {
  if (mask.rows() != m.rows() || mask.cols() != m.cols()) throw ShapeError("mask does not match slice");
  if ((qm.array() < 0.0).any()) throw DomainError("coefficients must be nonnegative");
  const SliceMatrix recon = slice_reconstruct(model, qm);
  if (recon.rows() != m.rows() || recon.cols() != m.cols()) throw ShapeError("model basis does not match slice");
  SliceMatrix out = m;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!mask.observed(i, j)) out(i, j) = recon(i, j);
  return out;
}

/// Mean of all training slices.
inline SliceMatrix historic_average(const DenseTensor3& train) {
  std::vector<Index> all(static_cast<std::size_t>(train.l()));
  std::iota(all.begin(), all.end(), Index{0});
  const Vector flat = detail::mean_of_slices_flat(train, std::move(all));
  return Eigen::Map<const Matrix>(flat.data(), train.n(), train.m());
}

/// Unweighted mean of the K nearest training slices. Slices are summed in
/// index order so K = l_train reproduces historic_average bit for bit.
inline SliceMatrix historic_nn(const DenseTensor3& train, const Eigen::Ref<const Matrix>& m,
                               const ObservationMask& mask, Index K) {
  const NeighborSet nb = knn_select(train, m, mask, K);
  const Vector flat = detail::mean_of_slices_flat(train, nb.indices);
  return Eigen::Map<const Matrix>(flat.data(), train.n(), train.m());
}

/// Root-mean-square error over the unobserved entries of each test slice,
/// and their mean (GPE).
inline PredictionReport evaluate(std::span<const SliceMatrix> predictions, const DenseTensor3& truths,
                                 const ObservationMask& mask, Method method) {
  if (static_cast<Index>(predictions.size()) != truths.l())
    throw ShapeError(std::to_string(predictions.size()) + " predictions for " + std::to_string(truths.l()) +
                     " test sequences");
  if (mask.rows() != truths.n() || mask.cols() != truths.m()) throw ShapeError("mask does not match test slices");
  const Index missing = mask.unobserved_count();
  if (missing == 0) throw ParameterError("mask leaves no unobserved entries to score");
  PredictionReport report;
  report.method = method;
  for (Index k = 0; k < truths.l(); ++k) {
    const SliceMatrix& pred = predictions[k];
    if (pred.rows() != truths.n() || pred.cols() != truths.m())
      throw ShapeError("prediction " + std::to_string(k) + " is " + detail::dims_string(pred.rows(), pred.cols()));
    const auto truth = truths.slice_view(k);
    double sum = 0.0;
    for (Index j = 0; j < truths.m(); ++j)
      for (Index i = 0; i < truths.n(); ++i)
        if (!mask.observed(i, j)) {
          const double d = pred(i, j) - truth(i, j);
          sum += d * d;
        }
    report.per_sequence_error.push_back(std::sqrt(sum / static_cast<double>(missing)));
  }
  report.gpe = std::accumulate(report.per_sequence_error.begin(), report.per_sequence_error.end(), 0.0) /
               static_cast<double>(report.per_sequence_error.size());
  return report;
}

/// Predictions for every test slice with one method.
inline std::vector<SliceMatrix> predict_all(const DenseTensor3& train, const DenseTensor3& test,
                                            const ObservationMask& mask, const CPModel& model, Method method,
                                            const CompletionOptions& opts) {
  opts.validate();
  std::vector<SliceMatrix> out;
  out.reserve(static_cast<std::size_t>(test.l()));
  const SliceMatrix average = method == Method::historic_average ? historic_average(train) : SliceMatrix{};
  for (Index k = 0; k < test.l(); ++k) {
    const auto m = test.slice_view(k);
    switch (method) {
      case Method::historic_average: out.push_back(average); break;
      case Method::historic_nn: out.push_back(historic_nn(train, m, mask, opts.K)); break;
      case Method::ntf_knn: {
        const NeighborSet nb = knn_select(train, m, mask, opts.K);
        const CoefficientEstimate est = estimate_coefficients(m, mask, model, nb, opts);
        out.push_back(predict_missing(m, mask, est.qm, model));
        break;
      }
    }
  }
  return out;
}

/// Experimental protocol for the synthetic long-term prediction benchmark.
struct BenchmarkProtocol {
  Index train_size = 89;
  double link_fraction = 0.25;  ///< most congested share of links kept
  Index window_begin = 10;      ///< first step kept (0-based)
  Index window_end = 43;        ///< one past the last step kept
  Index observed_steps = 5;     ///< leading steps of the window that are observed
  std::vector<Index> k_sweep{1, 3, 5, 7, 9};
  FactorizationOptions factorization{.rank = kPredictionRank};

  void validate(const DenseTensor3& t) const {
    if (train_size < 1 || train_size >= t.l())
      throw ParameterError("train size " + std::to_string(train_size) + " must leave at least one test sequence of " +
                           std::to_string(t.l()));
    if (!(link_fraction > 0.0 && link_fraction <= 1.0)) throw ParameterError("link fraction must be in (0, 1]");
    if (window_begin < 0 || window_end > t.m() || window_begin >= window_end)
      throw ParameterError("step window [" + std::to_string(window_begin) + ", " + std::to_string(window_end) +
                           ") invalid for " + std::to_string(t.m()) + " steps");
    if (observed_steps < 1 || observed_steps >= window_end - window_begin)
      throw ParameterError("observed steps must be in [1, window length)");
  }
};

struct BenchmarkResult {
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
  std::vector<Index> links;
  CPModel model;
  FactorizationReport factorization;
  std::vector<PredictionReport> reports;              ///< ntf_knn, historic_nn, historic_average
  std::vector<std::pair<Index, double>> k_sweep;      ///< (K, ntf_knn GPE)
};

/// Indices of the round(fraction·n) links with the lowest mean traffic index
/// (most congested), ascending by index.
inline std::vector<Index> most_congested_links(const DenseTensor3& t, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("link fraction must be in (0, 1]");
  const Vector means = t.unfolding().rowwise().mean();
  std::vector<Index> order(static_cast<std::size_t>(t.n()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return means(a) < means(b); });
  const auto keep = std::clamp<Index>(static_cast<Index>(std::llround(fraction * static_cast<double>(t.n()))), 1, t.n());
  std::vector<Index> out(order.begin(), order.begin() + keep);
  std::sort(out.begin(), out.end());
  return out;
}

/// Random train/test split of the sequence way; both index lists ascending.
inline std::pair<std::vector<Index>, std::vector<Index>> split_sequences(Index l, Index train_size,
                                                                         std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(l));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Index> train(perm.begin(), perm.begin() + train_size), test(perm.begin() + train_size, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

/// Full benchmark: split, link and window selection, rank-r NTF on the
/// training days, all three methods on every test day, and the GPE-vs-K sweep.
inline BenchmarkResult run_benchmark(const TrafficTensor& t, std::uint64_t split_seed, const CompletionOptions& opts,
                                     const BenchmarkProtocol& protocol) {
  protocol.validate(t);
  opts.validate();
  BenchmarkResult out;
  std::tie(out.train_indices, out.test_indices) = split_sequences(t.l(), protocol.train_size, split_seed);
  std::vector<Index> all_links(static_cast<std::size_t>(t.n()));
  std::iota(all_links.begin(), all_links.end(), Index{0});
  const DenseTensor3 train_full = subtensor(t.dense(), all_links, 0, t.m(), out.train_indices);
  out.links = most_congested_links(train_full, protocol.link_fraction);

  const DenseTensor3 train =
      subtensor(t.dense(), out.links, protocol.window_begin, protocol.window_end, out.train_indices);
  const DenseTensor3 test = subtensor(t.dense(), out.links, protocol.window_begin, protocol.window_end, out.test_indices);
  const ObservationMask mask = ObservationMask::leading_columns(train.n(), train.m(), protocol.observed_steps);

  std::tie(out.model, out.factorization) = ntf_decompose(train, protocol.factorization);

  for (Method method : {Method::ntf_knn, Method::historic_nn, Method::historic_average}) {
    const auto preds = predict_all(train, test, mask, out.model, method, opts);
    out.reports.push_back(evaluate(preds, test, mask, method));
  }
  for (Index K : protocol.k_sweep) {
    CompletionOptions swept = opts;
    swept.K = K;
    const auto preds = predict_all(train, test, mask, out.model, Method::ntf_knn, swept);
    out.k_sweep.emplace_back(K, evaluate(preds, test, mask, Method::ntf_knn).gpe);
  }
  return out;
}

}  // namespace ntftraffic
