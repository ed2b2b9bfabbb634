#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "simmc/clustering.hpp"
#include "test_util.hpp"

namespace simmc {
namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix m(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

// Gaussian blobs plus uniform clutter: a mix of cores, borders and noise.
Matrix blobs(Rng& rng, int n, int dims) {
  std::uniform_int_distribution<int> centers(1, 5);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const int k = centers(rng);
  Matrix c(k, dims);
  for (Index i = 0; i < c.size(); ++i) c.data()[i] = box(rng);
  Matrix pts(n, dims);
  std::uniform_int_distribution<int> pick(0, k);
  for (int i = 0; i < n; ++i) {
    const int which = pick(rng);
    for (int d = 0; d < dims; ++d) {
      pts(i, d) = which == k ? box(rng) : c(which, d) + g(rng);
    }
  }
  return pts;
}

TEST(Dbscan, OneDimensionalExample) {
  const auto a = dbscan(column({0, 0.1, 0.2, 10, 10.1}), 0.5, 2);
  EXPECT_EQ(a.cluster_count, 2);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 0, 1, 1}));
  EXPECT_EQ(a.noise_count(), 0);
}

TEST(Dbscan, SinglePointOwnCluster) {
  const auto a = dbscan(column({3.0}), 1.0, 1);
  EXPECT_EQ(a.cluster_count, 1);
  EXPECT_EQ(a.labels, std::vector<int>{0});
}

TEST(Dbscan, AllFarApartIsNoise) {
  const auto a = dbscan(column({0, 5, 10, 15}), 1.0, 2);
  EXPECT_EQ(a.cluster_count, 0);
  EXPECT_EQ(a.noise_count(), 4);
}

TEST(Dbscan, EpsIsInclusive) {
  const auto a = dbscan(column({0.0, 0.5}), 0.5, 2);
  EXPECT_EQ(a.cluster_count, 1);
}

TEST(Dbscan, BorderJoinsFirstCluster) {
  // x=5 is within eps of a core point in each cluster but is not itself
  // core; the cluster found first in scan order keeps it.
  const auto a = dbscan(column({6.0, 6.1, 6.2, 6.3, 5.0, 3.7, 3.8, 3.9, 4.0}), 1.0, 4);
  EXPECT_EQ(a.cluster_count, 2);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1}));
}

TEST(Dbscan, RejectsBadArguments) {
  EXPECT_THROW(dbscan(column({0}), 0.0, 1), std::invalid_argument);
  EXPECT_THROW(dbscan(column({0}), 1.0, 0), std::invalid_argument);
  EXPECT_THROW(dbscan(Matrix(0, 2), 1.0, 1), std::invalid_argument);
}

TEST(Dbscan, MatchesBruteForceOracle) {
  Rng rng(31);
  std::uniform_int_distribution<int> size(1, 200), dims(1, 4), mp(1, 6);
  std::uniform_real_distribution<double> eps(0.3, 2.5);
  for (int trial = 0; trial < 60; ++trial) {
    const Matrix pts = blobs(rng, size(rng), dims(rng));
    const double e = eps(rng);
    const int m = mp(rng);
    const auto got = dbscan(pts, e, m);
    const auto want = oracle::dbscan(pts, e, m);
    ASSERT_EQ(got.cluster_count, want.clusters) << "trial " << trial;
    EXPECT_EQ(got.labels, want.labels) << "trial " << trial;
  }
}

TEST(Dbscan, CorePartitionInvariantUnderPermutation) {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix pts = blobs(rng, 120, 2);
    std::vector<Index> perm(static_cast<std::size_t>(pts.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix shuffled(pts.rows(), pts.cols());
    for (Index i = 0; i < pts.rows(); ++i) shuffled.row(i) = pts.row(perm[i]);

    const auto a = dbscan(pts, 1.0, 4);
    const auto b = dbscan(shuffled, 1.0, 4);
    const auto truth = oracle::dbscan(pts, 1.0, 4);
    ASSERT_EQ(a.cluster_count, b.cluster_count);
    // Same core partition: core points share a label in one run iff they do
    // in the other.
    std::set<std::pair<int, int>> pairs;
    for (Index i = 0; i < pts.rows(); ++i) {
      if (!truth.core[i]) continue;
      pairs.emplace(a.labels[i], b.labels[std::find(perm.begin(), perm.end(), i) - perm.begin()]);
    }
    EXPECT_EQ(static_cast<int>(pairs.size()), a.cluster_count);
    // Noise set identical.
    for (Index j = 0; j < pts.rows(); ++j) {
      EXPECT_EQ(b.labels[j] == kNoise, a.labels[perm[j]] == kNoise);
    }
  }
}

TEST(KnnPercentile, CountsSelf) {
  const Matrix pts = column({0, 1, 3});
  EXPECT_EQ(knn_distance_percentile(pts, 1, 50), 0.0);
  // Second-nearest (self included): 1, 1, 2.
  EXPECT_DOUBLE_EQ(knn_distance_percentile(pts, 2, 0), 1.0);
  EXPECT_DOUBLE_EQ(knn_distance_percentile(pts, 2, 100), 2.0);
  EXPECT_DOUBLE_EQ(knn_distance_percentile(pts, 2, 75), 1.5);
  EXPECT_THROW(knn_distance_percentile(pts, 2, 101), std::invalid_argument);
}

TEST(Prototypes, TwoPointMean) {
  Matrix pts(2, 2);
  pts << 1, 0, 0, 1;
  ClusterAssignment a;
  a.labels = {0, 0};
  a.cluster_count = 1;
  const auto p = build_prototypes(pts, a);
  EXPECT_EQ(p.prototypes(0, 0), 0.5);
  EXPECT_EQ(p.prototypes(0, 1), 0.5);
  EXPECT_EQ(p.member_counts, std::vector<int>{2});
}

TEST(Prototypes, SingletonAndNoise) {
  Matrix pts(3, 2);
  pts << 1, 2, 9, 9, 3, 4;
  ClusterAssignment a;
  a.labels = {1, kNoise, 0};
  a.cluster_count = 2;
  const auto p = build_prototypes(pts, a);
  EXPECT_TRUE(test::bitwise_equal(Matrix(p.prototypes.row(0)), Matrix(pts.row(2))));
  EXPECT_TRUE(test::bitwise_equal(Matrix(p.prototypes.row(1)), Matrix(pts.row(0))));
}

TEST(Prototypes, MatchSummationOracle) {
  Rng rng(33);
  const Matrix pts = test::random_matrix(9, 4, rng);
  ClusterAssignment a;
  a.labels = {0, 1, 2, 0, 1, 2, 0, kNoise, kNoise};
  a.cluster_count = 3;
  const auto p = build_prototypes(pts, a);
  for (int c = 0; c < 3; ++c) {
    for (Index d = 0; d < 4; ++d) {
      double sum = 0.0;
      int n = 0;
      for (Index i = 0; i < 9; ++i) {
        if (a.labels[i] == c) {
          sum += pts(i, d);
          ++n;
        }
      }
      EXPECT_NEAR(p.prototypes(c, d), sum / n, 1e-15);
    }
  }
}

TEST(Prototypes, EmptyWhenNoClusters) {
  ClusterAssignment a;
  a.labels = {kNoise, kNoise};
  const auto p = build_prototypes(Matrix::Ones(2, 3), a);
  EXPECT_TRUE(p.empty());
}

TEST(Prototypes, NormalizedInstancesGiveShortPrototypes) {
  Rng rng(34);
  const Matrix pts = l2_normalize_rows(blobs(rng, 150, 3));
  ClusterSettings s;
  const auto r = cluster_all_samplings(std::vector<Matrix>{pts}, s);
  ASSERT_FALSE(r.prototypes[0].empty());
  int members = 0;
  for (int c = 0; c < r.prototypes[0].size(); ++c) {
    EXPECT_LE(r.prototypes[0].prototypes.row(c).norm(), 1.0 + 1e-12);
    members += r.prototypes[0].member_counts[c];
  }
  EXPECT_LE(members, 150);
}

TEST(ClusterAll, SingleSamplingEqualsDbscan) {
  Rng rng(35);
  const Matrix pts = blobs(rng, 80, 2);
  ClusterSettings s;
  s.eps = 0.8;
  const auto r = cluster_all_samplings(std::vector<Matrix>{pts}, s);
  EXPECT_EQ(r.assignments[0].labels, dbscan(pts, 0.8, 4).labels);
  EXPECT_EQ(r.eps_used[0], 0.8);
}

TEST(ClusterAll, IdenticalSetsIdenticalResults) {
  Rng rng(36);
  const Matrix pts = blobs(rng, 80, 2);
  const auto r = cluster_all_samplings(std::vector<Matrix>{pts, pts}, ClusterSettings{});
  EXPECT_EQ(r.assignments[0].labels, r.assignments[1].labels);
  EXPECT_EQ(r.assignments[1].sampling_index, 1);
}

TEST(ClusterAll, SamplingsIndependent) {
  const Matrix two = column({0, 0.1, 0.2, 10, 10.1, 10.2});
  const Matrix one = column({0, 0.1, 0.2, 0.3, 0.4, 0.5});
  ClusterSettings s;
  s.eps = 0.5;
  s.min_pts = 2;
  const auto r = cluster_all_samplings(std::vector<Matrix>{two, one}, s);
  EXPECT_EQ(r.assignments[0].cluster_count, 2);
  EXPECT_EQ(r.assignments[1].cluster_count, 1);
  EXPECT_EQ(r.assignments[0].labels, oracle::dbscan(two, 0.5, 2).labels);
  EXPECT_EQ(r.assignments[1].labels, oracle::dbscan(one, 0.5, 2).labels);
}

TEST(ClusterAll, AutoEpsHasFloor) {
  // Duplicate points give a zero k-NN distance; eps must stay positive.
  const Matrix same = Matrix::Ones(6, 2);
  const auto r = cluster_all_samplings(std::vector<Matrix>{same}, ClusterSettings{});
  EXPECT_GT(r.eps_used[0], 0.0);
  EXPECT_EQ(r.assignments[0].cluster_count, 1);
}

TEST(ClusterSettings, Validation) {
  ClusterSettings s;
  s.eps = -1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = ClusterSettings{};
  s.min_pts = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace simmc
