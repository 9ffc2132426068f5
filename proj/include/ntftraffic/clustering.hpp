#pragma once

// Spectral clustering of daily sequences on their CP expansion coefficients
// (rows of Q), plus the per-cluster mean traffic index profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ntftraffic/linalg.hpp"
#include "ntftraffic/tensor.hpp"

namespace ntftraffic {

struct ClusterAssignment {
  std::vector<Index> labels;  ///< length l, values in [0, k)
  Index k = 0;
  Matrix centroid_coeffs;            ///< k x r mean Q-row per cluster
  std::vector<Index> medoid_index;   ///< member nearest its centroid, per cluster
};

/// Gaussian affinity over rows of Q; symmetric, unit diagonal.
struct AffinityMatrix {
  Matrix values;
  double sigma = 1.0;
};

/// Number of k-means restarts inside spectral_cluster.
inline constexpr int kKMeansRestarts = 20;

namespace detail {

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t h = xs.size() / 2;
  return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

inline Matrix pairwise_sq_distances(const Matrix& rows) {
  const Index l = rows.rows();
  Matrix d = Matrix::Zero(l, l);
  for (Index a = 0; a < l; ++a)
    for (Index b = a + 1; b < l; ++b) d(a, b) = d(b, a) = (rows.row(a) - rows.row(b)).squaredNorm();
  return d;
}

struct KMeansResult {
  std::vector<Index> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

inline std::vector<Index> kmeanspp_seeds(const Matrix& pts, Index k, std::mt19937_64& rng) {
  const Index l = pts.rows();
  std::vector<Index> seeds;
  std::uniform_int_distribution<Index> first(0, l - 1);
  seeds.push_back(first(rng));
  Vector nearest = (pts.rowwise() - pts.row(seeds[0])).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<Index>(seeds.size()) < k) {
    const double total = nearest.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (Index p = 0; p < l; ++p) {
        acc += nearest(p);
        if (nearest(p) > 0.0 && acc >= target) {
          pick = p;
          break;
        }
      }
      if (pick < 0)
        for (Index p = l - 1; p >= 0; --p)
          if (nearest(p) > 0.0) {
            pick = p;
            break;
          }
    } else {
      // Every remaining point coincides with a seed.
      for (Index p = 0; p < l && pick < 0; ++p)
        if (std::find(seeds.begin(), seeds.end(), p) == seeds.end()) pick = p;
    }
    seeds.push_back(pick);
    nearest = nearest.cwiseMin((pts.rowwise() - pts.row(pick)).rowwise().squaredNorm());
  }
  return seeds;
}

/// Lloyd iterations from the given seeds. Empty clusters take over the point
/// farthest from its own centroid among clusters with more than one member.
inline KMeansResult lloyd(const Matrix& pts, Index k, const std::vector<Index>& seeds, int max_iters = 300) {
  const Index l = pts.rows(), dim = pts.cols();
  Matrix centers(k, dim);
  for (Index c = 0; c < k; ++c) centers.row(c) = pts.row(seeds[c]);
  std::vector<Index> labels(static_cast<std::size_t>(l), -1);

  auto assign = [&] {
    bool changed = false;
    for (Index p = 0; p < l; ++p) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double d = (pts.row(p) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[p] != best) {
        labels[p] = best;
        changed = true;
      }
    }
    return changed;
  };
  auto repair_empty = [&] {
    bool changed = false;
    for (;;) {
      std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
      for (Index lab : labels) ++sizes[lab];
      const auto empty = std::find(sizes.begin(), sizes.end(), Index{0});
      if (empty == sizes.end()) return changed;
      Index far = -1;
      double far_d = -1.0;
      for (Index p = 0; p < l; ++p) {
        if (sizes[labels[p]] < 2) continue;
        const double d = (pts.row(p) - centers.row(labels[p])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = p;
        }
      }
      const Index c = static_cast<Index>(empty - sizes.begin());
      labels[far] = c;
      centers.row(c) = pts.row(far);
      changed = true;
    }
  };
  auto update_centers = [&] {
    centers.setZero();
    std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
    for (Index p = 0; p < l; ++p) {
      centers.row(labels[p]) += pts.row(p);
      ++sizes[labels[p]];
    }
    for (Index c = 0; c < k; ++c) centers.row(c) /= static_cast<double>(sizes[c]);
  };

  assign();
  repair_empty();
  for (int it = 0; it < max_iters; ++it) {
    update_centers();
    bool changed = assign();
    changed = repair_empty() || changed;
    if (!changed) break;
  }
  update_centers();

  KMeansResult out;
  out.inertia = 0.0;
  for (Index p = 0; p < l; ++p) out.inertia += (pts.row(p) - centers.row(labels[p])).squaredNorm();
  out.labels = std::move(labels);
  return out;
}

/// Relabels so cluster ids appear in order of first occurrence.
inline std::vector<Index> canonical_labels(std::span<const Index> labels) {
  std::map<Index, Index> remap;
  std::vector<Index> out;
  out.reserve(labels.size());
  for (Index lab : labels) {
    auto [it, inserted] = remap.try_emplace(lab, static_cast<Index>(remap.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace detail

/// A_ab = exp(−‖Q_a − Q_b‖² / (2σ²)). Without an explicit sigma the
/// bandwidth is the median nonzero pairwise distance (1.0 if all are zero).
inline AffinityMatrix build_affinity(const Matrix& q, std::optional<double> sigma = std::nullopt) {
  const Index l = q.rows();
  if (l < 2) throw ParameterError("affinity needs at least 2 sequences, got " + std::to_string(l));
  if (sigma && !(*sigma > 0.0)) throw ParameterError("affinity bandwidth must be > 0");
  const Matrix d2 = detail::pairwise_sq_distances(q);
  AffinityMatrix out;
  if (sigma) {
    out.sigma = *sigma;
  } else {
    std::vector<double> dists;
    for (Index a = 0; a < l; ++a)
      for (Index b = a + 1; b < l; ++b)
        if (d2(a, b) > 0.0) dists.push_back(std::sqrt(d2(a, b)));
    out.sigma = dists.empty() ? 1.0 : detail::median(std::move(dists));
  }
  const double denom = 2.0 * out.sigma * out.sigma;
  out.values = (-d2.array() / denom).exp().matrix();
  out.values.diagonal().setOnes();
  return out;
}

/// Normalized spectral clustering (symmetric Laplacian, row-normalized top-k
/// eigenvector embedding) followed by k-means++ with kKMeansRestarts restarts.
inline ClusterAssignment spectral_cluster(const Matrix& q, Index k, std::uint64_t seed) {
  const Index l = q.rows();
  if (k < 2 || k > l)
    throw ParameterError("cluster count " + std::to_string(k) + " outside [2, " + std::to_string(l) + "]");
  const AffinityMatrix affinity = build_affinity(q);
  const Vector inv_sqrt_degree = affinity.values.rowwise().sum().array().rsqrt().matrix();
  const Matrix normalized = inv_sqrt_degree.asDiagonal() * affinity.values * inv_sqrt_degree.asDiagonal();
  // Largest eigenvalues of D^-1/2 A D^-1/2 are the smallest of L_sym.
  const SymmetricEigen eig = symmetric_eigen_jacobi(0.5 * (normalized + normalized.transpose()));
  Matrix embedding = eig.vectors.leftCols(k);
  for (Index p = 0; p < l; ++p) {
    const double norm = embedding.row(p).norm();
    if (norm > 0.0) embedding.row(p) /= norm;
  }

  std::mt19937_64 rng(seed);
  detail::KMeansResult best;
  for (int restart = 0; restart < kKMeansRestarts; ++restart) {
    const auto seeds = detail::kmeanspp_seeds(embedding, k, rng);
    detail::KMeansResult run = detail::lloyd(embedding, k, seeds);
    if (run.inertia < best.inertia) best = std::move(run);
  }

  ClusterAssignment out;
  out.k = k;
  out.labels = detail::canonical_labels(best.labels);
  out.centroid_coeffs = Matrix::Zero(k, q.cols());
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  for (Index p = 0; p < l; ++p) {
    out.centroid_coeffs.row(out.labels[p]) += q.row(p);
    ++sizes[out.labels[p]];
  }
  for (Index c = 0; c < k; ++c) out.centroid_coeffs.row(c) /= static_cast<double>(sizes[c]);
  out.medoid_index.assign(static_cast<std::size_t>(k), -1);
  std::vector<double> medoid_d(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  for (Index p = 0; p < l; ++p) {
    const Index c = out.labels[p];
    const double d = (q.row(p) - out.centroid_coeffs.row(c)).squaredNorm();
    if (d < medoid_d[c]) {
      medoid_d[c] = d;
      out.medoid_index[c] = p;
    }
  }
  return out;
}

/// Network-wide mean traffic index at each step.
inline Vector mean_index_sequence(const Eigen::Ref<const Matrix>& slice) {
  return slice.colwise().mean().transpose();
}

/// Mean index sequence of each cluster's medoid slice.
inline std::vector<Vector> cluster_profiles(const DenseTensor3& t, const ClusterAssignment& assignment) {
  if (static_cast<Index>(assignment.labels.size()) != t.l())
    throw ShapeError("assignment has " + std::to_string(assignment.labels.size()) + " labels for " +
                     std::to_string(t.l()) + " sequences");
  if (static_cast<Index>(assignment.medoid_index.size()) != assignment.k)
    throw ShapeError("assignment medoid count does not match k");
  std::vector<Vector> out;
  out.reserve(assignment.medoid_index.size());
  for (Index medoid : assignment.medoid_index) out.push_back(mean_index_sequence(frontal_slice(t, medoid)));
  return out;
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b) {
  if (a.size() != b.size()) throw ShapeError("label sequences differ in length");
  const auto ca = detail::canonical_labels(a), cb = detail::canonical_labels(b);
  const Index ka = ca.empty() ? 0 : *std::max_element(ca.begin(), ca.end()) + 1;
  const Index kb = cb.empty() ? 0 : *std::max_element(cb.begin(), cb.end()) + 1;
  Matrix table = Matrix::Zero(ka, kb);
  for (std::size_t p = 0; p < ca.size(); ++p) table(ca[p], cb[p]) += 1.0;
  auto choose2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (Index i = 0; i < ka; ++i)
    for (Index j = 0; j < kb; ++j) index += choose2(table(i, j));
  for (Index i = 0; i < ka; ++i) sum_a += choose2(table.row(i).sum());
  for (Index j = 0; j < kb; ++j) sum_b += choose2(table.col(j).sum());
  const double total = choose2(static_cast<double>(ca.size()));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace ntftraffic
