#include <gtest/gtest.h>

#include "ntftraffic/clustering.hpp"
#include "ntftraffic/datagen.hpp"
#include "oracles.hpp"

using namespace ntftraffic;

namespace {

// Two clouds of `per` points in r dimensions, spread `spread`, centres
// `separation` apart along the first axis.
std::pair<Matrix, std::vector<Index>> two_blobs(Index per, Index r, double spread, double separation,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-spread, spread);
  Matrix q(2 * per, r);
  std::vector<Index> labels;
  for (Index p = 0; p < 2 * per; ++p) {
    const Index blob = p % 2;
    for (Index c = 0; c < r; ++c) q(p, c) = 5.0 + d(rng);
    q(p, 0) += blob * separation;
    labels.push_back(blob);
  }
  return {q, labels};
}

}  // namespace

TEST(BuildAffinity, IdenticalRowsAndDiagonal) {
  Matrix q = oracle::random_matrix(6, 3, 1);
  q.row(4) = q.row(1);
  const AffinityMatrix a = build_affinity(q);
  EXPECT_EQ(a.values(1, 4), 1.0);
  for (Index p = 0; p < 6; ++p) EXPECT_EQ(a.values(p, p), 1.0);
  EXPECT_TRUE(a.values.isApprox(a.values.transpose(), 1e-12));
  EXPECT_TRUE((a.values.array() >= 0.0).all() && (a.values.array() <= 1.0).all());
}

TEST(BuildAffinity, AutoBandwidthOnTwoPoints) {
  const Matrix q{{0.0}, {2.5}};
  const AffinityMatrix a = build_affinity(q);
  EXPECT_DOUBLE_EQ(a.sigma, 2.5);
  EXPECT_NEAR(a.values(0, 1), 0.6065306597126334, 1e-15);
}

TEST(BuildAffinity, ExplicitBandwidthFallbackAndErrors) {
  const Matrix q{{0.0}, {1.0}};
  EXPECT_NEAR(build_affinity(q, 2.0).values(0, 1), std::exp(-1.0 / 8.0), 1e-15);
  const AffinityMatrix same = build_affinity(Matrix::Ones(3, 2));
  EXPECT_EQ(same.sigma, 1.0);
  EXPECT_TRUE(same.values.isOnes(0.0));
  EXPECT_THROW(build_affinity(Matrix::Ones(1, 3)), ParameterError);
  EXPECT_THROW(build_affinity(q, 0.0), ParameterError);
}

TEST(BuildAffinity, PermutationEquivariant) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix q = oracle::random_matrix(7, 3, seed);
    std::vector<Index> perm(7);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix qp(7, 3);
    for (Index p = 0; p < 7; ++p) qp.row(p) = q.row(perm[p]);
    const Matrix a = build_affinity(q).values, ap = build_affinity(qp).values;
    for (Index x = 0; x < 7; ++x)
      for (Index y = 0; y < 7; ++y) EXPECT_NEAR(ap(x, y), a(perm[x], perm[y]), 1e-15);
  }
}

TEST(SpectralCluster, TwoBlobsRecoveredOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [q, planted] = two_blobs(8, 3, 0.1, 2.0, seed);
    const ClusterAssignment a = spectral_cluster(q, 2, seed);
    EXPECT_EQ(adjusted_rand_index(a.labels, planted), 1.0) << "seed " << seed;
  }
}

TEST(SpectralCluster, KEqualsLGivesSingletons) {
  const Matrix q = oracle::random_matrix(5, 2, 3);
  const ClusterAssignment a = spectral_cluster(q, 5, 0);
  EXPECT_EQ(a.labels, (std::vector<Index>{0, 1, 2, 3, 4}));
  for (Index c = 0; c < 5; ++c) {
    EXPECT_EQ(a.medoid_index[c], c);
    EXPECT_TRUE(a.centroid_coeffs.row(c).isApprox(q.row(c)));
  }
}

TEST(SpectralCluster, InvariantsAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix q = oracle::random_matrix(15, 4, seed + 50);
    const Index k = 2 + static_cast<Index>(seed % 4);
    const ClusterAssignment a = spectral_cluster(q, k, seed);
    const ClusterAssignment b = spectral_cluster(q, k, seed);
    EXPECT_EQ(a.labels, b.labels);
    ASSERT_EQ(a.k, k);
    ASSERT_EQ(static_cast<Index>(a.labels.size()), 15);
    // Canonical: first occurrence order, every cluster non-empty.
    Index next = 0;
    for (Index lab : a.labels) {
      ASSERT_LE(lab, next);
      if (lab == next) ++next;
    }
    EXPECT_EQ(next, k);
    for (Index c = 0; c < k; ++c) {
      Vector mean = Vector::Zero(4);
      Index count = 0;
      for (Index p = 0; p < 15; ++p)
        if (a.labels[p] == c) {
          mean += q.row(p).transpose();
          ++count;
        }
      mean /= static_cast<double>(count);
      EXPECT_LT((a.centroid_coeffs.row(c).transpose() - mean).cwiseAbs().maxCoeff(), 1e-12);
      const Index medoid = a.medoid_index[c];
      EXPECT_EQ(a.labels[medoid], c);
      for (Index p = 0; p < 15; ++p)
        if (a.labels[p] == c) {
          EXPECT_LE((q.row(medoid).transpose() - mean).norm(), (q.row(p).transpose() - mean).norm());
        }
    }
  }
}

TEST(SpectralCluster, ScaleInvariant) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto [q, planted] = two_blobs(6, 3, 0.3, 1.5, seed + 100);
    const ClusterAssignment a = spectral_cluster(q, 3, seed);
    const ClusterAssignment b = spectral_cluster(q * 17.0, 3, seed);
    EXPECT_NEAR(adjusted_rand_index(a.labels, b.labels), 1.0, 1e-12);
  }
}

TEST(SpectralCluster, KOutOfRange) {
  const Matrix q = oracle::random_matrix(4, 2, 1);
  EXPECT_THROW(spectral_cluster(q, 1, 0), ParameterError);
  EXPECT_THROW(spectral_cluster(q, 5, 0), ParameterError);
}

TEST(MeanIndexSequence, Cases) {
  EXPECT_TRUE(mean_index_sequence(Matrix::Ones(4, 3)).isApprox(Vector::Ones(3)));
  Matrix s = oracle::random_matrix(5, 3, 2);
  s.col(1).setConstant(0.37);
  EXPECT_NEAR(mean_index_sequence(s)(1), 0.37, 1e-15);
  const Matrix hand{{0.0, 1.0}, {0.5, 1.0}, {1.0, 1.0}};
  EXPECT_EQ(mean_index_sequence(hand), (Vector{{0.5, 1.0}}));
}

TEST(ClusterProfiles, SingleClusterAndSingletons) {
  const DenseTensor3 t(3, 4, 3, oracle::random_values(36, 8));
  ClusterAssignment one{{0, 0, 0}, 1, Matrix::Zero(1, 2), {1}};
  const auto p1 = cluster_profiles(t, one);
  ASSERT_EQ(p1.size(), 1u);
  EXPECT_TRUE(p1[0].isApprox(mean_index_sequence(frontal_slice(t, 1))));

  ClusterAssignment singles{{0, 1, 2}, 3, Matrix::Zero(3, 2), {0, 1, 2}};
  const auto p3 = cluster_profiles(t, singles);
  for (Index k = 0; k < 3; ++k) {
    EXPECT_TRUE(p3[k].isApprox(mean_index_sequence(frontal_slice(t, k))));
    EXPECT_TRUE((p3[k].array() >= 0.0).all() && (p3[k].array() <= 1.0).all());
  }

  ClusterAssignment wrong{{0, 0}, 1, Matrix::Zero(1, 2), {0}};
  EXPECT_THROW(cluster_profiles(t, wrong), ShapeError);
}

TEST(ClusterProfiles, HeavyDipsBelowLight) {
  GeneratorConfig config{.n = 60, .m = 48, .l = 25};
  const auto [t, planted] = generate(config);
  // Planted assignment with the first member of each archetype as medoid.
  ClusterAssignment a{planted, static_cast<Index>(kArchetypeCount), Matrix::Zero(5, 1), std::vector<Index>(5, -1)};
  for (Index k = 0; k < t.l(); ++k)
    if (a.medoid_index[planted[k]] < 0) a.medoid_index[planted[k]] = k;
  const auto profiles = cluster_profiles(t, a);
  const double light = std::min(profiles[0].minCoeff(), profiles[1].minCoeff());
  const double heavy = std::max(profiles[2].minCoeff(), profiles[3].minCoeff());
  EXPECT_LT(heavy, light);
}

TEST(AdjustedRandIndex, HandValues) {
  const std::vector<Index> a{0, 0, 1, 1}, b{0, 1, 0, 1}, c{5, 5, 2, 2};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, b), -0.5);
  EXPECT_EQ(adjusted_rand_index(a, c), 1.0);
  EXPECT_THROW(adjusted_rand_index(a, std::vector<Index>{0, 1}), ShapeError);
}

TEST(JacobiEigen, MatchesReferenceSolver) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = oracle::random_matrix(12, 12, seed, -1.0, 1.0);
    const Matrix s = x + x.transpose();
    const SymmetricEigen eig = symmetric_eigen_jacobi(s);
    const Eigen::SelfAdjointEigenSolver<Matrix> ref(s);
    for (Index i = 0; i < 12; ++i) EXPECT_NEAR(eig.values(i), ref.eigenvalues()(11 - i), 1e-10);
    EXPECT_LT((s * eig.vectors - eig.vectors * eig.values.asDiagonal()).norm(), 1e-10);
    EXPECT_LT((eig.vectors.transpose() * eig.vectors - Matrix::Identity(12, 12)).norm(), 1e-10);
  }
}

TEST(JacobiEigen, NonConvergenceReported) {
  const Matrix x = oracle::random_matrix(8, 8, 3);
  EXPECT_THROW(symmetric_eigen_jacobi(x + x.transpose(), 1e-14, 0), NumericalError);
}
