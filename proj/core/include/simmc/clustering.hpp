#pragma once

#include <optional>
#include <span>
#include <vector>

#include "simmc/types.hpp"

namespace simmc {

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  int sampling_index = 0;
  std::vector<int> labels;  // cluster id in [0, cluster_count) or kNoise
  int cluster_count = 0;

  int noise_count() const;
};

struct PrototypeSet {
  int sampling_index = 0;
  Matrix prototypes;  // C x H, row c is the mean of cluster c
  std::vector<int> member_counts;

  int size() const { return static_cast<int>(prototypes.rows()); }
  bool empty() const { return prototypes.rows() == 0; }
};

// DBSCAN over the rows of points with Euclidean distance. A point is core
// when at least min_pts points (itself included) lie within eps. Points are
// scanned in index order; a border point joins the first cluster to reach it.
ClusterAssignment dbscan(const Matrix& points, double eps, int min_pts);

// The given percentile of each point's distance to its min_pts-th nearest
// point, counting the point itself (so min_pts = 1 yields 0).
double knn_distance_percentile(const Matrix& points, int min_pts, double percentile);

PrototypeSet build_prototypes(const Matrix& instances, const ClusterAssignment& assignment);

struct ClusterSettings {
  std::optional<double> eps;  // unset: derive from knn_distance_percentile
  double eps_percentile = 30.0;
  int min_pts = 4;

  void validate() const;
};

struct ClusteringResult {
  std::vector<ClusterAssignment> assignments;
  std::vector<PrototypeSet> prototypes;
  std::vector<double> eps_used;

  bool any_clusters() const;
};

// Clusters each sampling's instance set independently.
ClusteringResult cluster_all_samplings(std::span<const Matrix> instance_sets,
                                       const ClusterSettings& settings);

Matrix l2_normalize_rows(const Matrix& m);

}  // namespace simmc
