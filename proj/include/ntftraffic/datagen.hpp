#pragma once

// Synthetic traffic tensors with planted congestion archetypes, and the 3D
// PCA projection of network-level traffic states used for trajectory plots.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ntftraffic/tensor.hpp"

namespace ntftraffic {

inline constexpr std::size_t kArchetypeCount = 5;

/// One congestion dip over a contiguous link range. Link range and timing
/// are fractions of n and m.
struct Dip {
  double depth;  ///< depth below free flow (1.0)
  double link_begin;
  double link_end;
  double peak;   ///< dip centre as a fraction of the day
  double width;  ///< dip half-width as a fraction of the day
};

/// Planted daily pattern: free flow minus a cosine bump on each of its dips.
/// An archetype's congestible subset is the union of its dip link ranges.
struct Archetype {
  std::string_view name;
  std::array<Dip, 2> dips;
  std::size_t dip_count;
};

// Each pair shares a core dip (same links, same timing) and adds a
// member-specific dip on links of equal count, so the congestible subsets
// of a pair overlap by half.
inline constexpr std::array<Archetype, kArchetypeCount> kArchetypes{{
    {"light-I", {{{0.30, 0.10, 0.20, 0.42, 0.25}, {0.30, 0.00, 0.10, 0.36, 0.22}}}, 2},
    {"light-II", {{{0.30, 0.10, 0.20, 0.42, 0.25}, {0.30, 0.20, 0.30, 0.50, 0.22}}}, 2},
    {"heavy-I", {{{0.70, 0.40, 0.50, 0.45, 0.30}, {0.30, 0.30, 0.40, 0.41, 0.28}}}, 2},
    {"heavy-II", {{{0.80, 0.40, 0.50, 0.45, 0.30}, {0.30, 0.50, 0.60, 0.49, 0.28}}}, 2},
    {"unclosed", {{{0.60, 0.60, 1.00, 0.00, 0.60}, {}}}, 1},
}};

struct GeneratorConfig {
  Index n = 200;
  Index m = 48;
  Index l = 108;
  std::array<double, kArchetypeCount> archetype_weights{0.2, 0.2, 0.2, 0.2, 0.2};
  double noise_sd = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || m < 1 || l < 1) throw ParameterError("generator dimensions must be >= 1");
    double sum = 0.0;
    for (double w : archetype_weights) {
      if (!(w >= 0.0)) throw ParameterError("archetype weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("archetype weights must sum to 1, got " + std::to_string(sum));
    if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
  }
};

/// Archetype id per sequence.
using PlantedLabels = std::vector<Index>;

/// Smooth compactly supported bump on [-1, 1]: 0.5 (1 + cos(π x)).
inline double cosine_bump(double x) {
  if (x <= -1.0 || x >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

/// Noise-free day for one archetype.
inline SliceMatrix archetype_slice(const Archetype& a, Index n, Index m) {
  SliceMatrix s = SliceMatrix::Ones(n, m);
  for (std::size_t d = 0; d < a.dip_count; ++d) {
    const Dip& dip = a.dips[d];
    const auto first = static_cast<Index>(std::floor(dip.link_begin * static_cast<double>(n)));
    const auto last = static_cast<Index>(std::floor(dip.link_end * static_cast<double>(n)));
    const double peak = dip.peak * static_cast<double>(m), width = dip.width * static_cast<double>(m);
    for (Index j = 0; j < m; ++j) {
      const double value = 1.0 - dip.depth * cosine_bump((static_cast<double>(j) - peak) / width);
      for (Index i = first; i < last; ++i) s(i, j) = std::min(s(i, j), value);
    }
  }
  return s;
}

namespace detail {

/// Exact per-archetype counts by largest remainder.
inline std::vector<Index> archetype_counts(const GeneratorConfig& config) {
  std::vector<Index> counts(kArchetypeCount);
  std::vector<double> remainder(kArchetypeCount);
  Index assigned = 0;
  for (std::size_t a = 0; a < kArchetypeCount; ++a) {
    const double exact = config.archetype_weights[a] * static_cast<double>(config.l);
    counts[a] = static_cast<Index>(std::floor(exact));
    remainder[a] = exact - static_cast<double>(counts[a]);
    assigned += counts[a];
  }
  std::vector<std::size_t> order(kArchetypeCount);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return remainder[x] > remainder[y]; });
  for (std::size_t p = 0; assigned < config.l; ++p, ++assigned) ++counts[order[p % kArchetypeCount]];
  return counts;
}

}  // namespace detail

/// Each day is free flow (1.0) minus its archetype's congestion dip, plus
/// Gaussian noise clipped to [0.01, 1]. Archetype counts follow the weights
/// exactly (largest remainder) in a seeded random order; each day draws its
/// noise from its own stream seeded by (seed, day index).
inline std::pair<TrafficTensor, PlantedLabels> generate(const GeneratorConfig& config) {
  config.validate();
  const auto counts = detail::archetype_counts(config);
  PlantedLabels labels;
  for (std::size_t a = 0; a < kArchetypeCount; ++a) labels.insert(labels.end(), counts[a], static_cast<Index>(a));
  std::mt19937_64 order_rng(config.seed);
  std::shuffle(labels.begin(), labels.end(), order_rng);

  std::array<SliceMatrix, kArchetypeCount> templates;
  for (std::size_t a = 0; a < kArchetypeCount; ++a) templates[a] = archetype_slice(kArchetypes[a], config.n, config.m);

  DenseTensor3 t(config.n, config.m, config.l);
  for (Index k = 0; k < config.l; ++k) {
    auto slice = t.slice_view(k);
    slice = templates[labels[k]];
    if (config.noise_sd > 0.0) {
      std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                        static_cast<std::uint32_t>(k)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, config.noise_sd);
      for (Index j = 0; j < config.m; ++j)
        for (Index i = 0; i < config.n; ++i) slice(i, j) = std::clamp(slice(i, j) + noise(rng), 0.01, 1.0);
    }
  }
  return {TrafficTensor(std::move(t)), std::move(labels)};
}

/// Projects states (one per column, n x count) onto their top three
/// principal axes. Returns count x 3 coordinates of the mean-centred data;
/// each axis is signed so its largest-magnitude loading is positive.
inline Matrix pca_project_3d(const Eigen::Ref<const Matrix>& states) {
  const Index n = states.rows(), count = states.cols();
  if (count < 4) throw ParameterError("PCA projection needs at least 4 states, got " + std::to_string(count));
  if (n < 3) throw ParameterError("PCA projection needs state dimension >= 3, got " + std::to_string(n));
  const Vector mean = states.rowwise().mean();
  const Matrix centered = states.colwise() - mean;
  const Matrix covariance = centered * centered.transpose() / static_cast<double>(count - 1);
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(covariance);
  if (solver.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  Matrix axes(n, 3);
  for (Index c = 0; c < 3; ++c) {
    Vector axis = solver.eigenvectors().col(n - 1 - c);
    Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    axes.col(c) = axis;
  }
  return centered.transpose() * axes;
}

}  // namespace ntftraffic
