#include "simmc/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace simmc {

namespace {

constexpr int kUnvisited = -2;

// The smallest eps we will hand to dbscan; keeps exact duplicates clusterable.
constexpr double kMinEps = 1e-12;

std::vector<int> region_query(const Matrix& points, Index i, double eps_sq) {
  std::vector<int> out;
  for (Index j = 0; j < points.rows(); ++j) {
    if ((points.row(i) - points.row(j)).squaredNorm() <= eps_sq) out.push_back(static_cast<int>(j));
  }
  return out;
}

}  // namespace

int ClusterAssignment::noise_count() const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), kNoise));
}

ClusterAssignment dbscan(const Matrix& points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be > 0");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
  if (points.rows() < 1) throw std::invalid_argument("dbscan: no points");
  if (!points.allFinite()) throw std::invalid_argument("dbscan: non-finite point");

  const Index n = points.rows();
  const double eps_sq = eps * eps;
  ClusterAssignment out;
  out.labels.assign(static_cast<std::size_t>(n), kUnvisited);

  for (Index i = 0; i < n; ++i) {
    if (out.labels[i] != kUnvisited) continue;
    const auto neighbors = region_query(points, i, eps_sq);
    if (static_cast<int>(neighbors.size()) < min_pts) {
      out.labels[i] = kNoise;
      continue;
    }
    const int cluster = out.cluster_count++;
    out.labels[i] = cluster;
    std::deque<int> frontier(neighbors.begin(), neighbors.end());
    while (!frontier.empty()) {
      const int j = frontier.front();
      frontier.pop_front();
      if (out.labels[j] == kNoise) {
        out.labels[j] = cluster;  // border point, not expanded further
        continue;
      }
      if (out.labels[j] != kUnvisited) continue;
      out.labels[j] = cluster;
      const auto reach = region_query(points, j, eps_sq);
      if (static_cast<int>(reach.size()) >= min_pts) {
        frontier.insert(frontier.end(), reach.begin(), reach.end());
      }
    }
  }
  return out;
}

double knn_distance_percentile(const Matrix& points, int min_pts, double percentile) {
  if (min_pts < 1) throw std::invalid_argument("min_pts must be >= 1");
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("eps percentile must lie in [0, 100]");
  }
  const Index n = points.rows();
  if (n < 1) throw std::invalid_argument("no points");
  const auto k = static_cast<std::size_t>(std::min<Index>(min_pts, n));

  std::vector<double> kth(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) dist[j] = (points.row(i) - points.row(j)).norm();
    std::nth_element(dist.begin(), dist.begin() + static_cast<long>(k - 1), dist.end());
    kth[i] = dist[k - 1];
  }
  std::sort(kth.begin(), kth.end());
  // Linear interpolation between closest ranks.
  const double pos = percentile / 100.0 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, kth.size() - 1);
  return kth[lo] + (pos - static_cast<double>(lo)) * (kth[hi] - kth[lo]);
}

PrototypeSet build_prototypes(const Matrix& instances, const ClusterAssignment& assignment) {
  if (static_cast<Index>(assignment.labels.size()) != instances.rows()) {
    throw std::invalid_argument("assignment does not match instance count");
  }
  PrototypeSet out;
  out.sampling_index = assignment.sampling_index;
  out.prototypes = Matrix::Zero(assignment.cluster_count, instances.cols());
  out.member_counts.assign(static_cast<std::size_t>(assignment.cluster_count), 0);
  for (Index i = 0; i < instances.rows(); ++i) {
    const int c = assignment.labels[i];
    if (c == kNoise) continue;
    if (c < 0 || c >= assignment.cluster_count) throw std::invalid_argument("bad cluster label");
    out.prototypes.row(c) += instances.row(i);
    ++out.member_counts[c];
  }
  for (int c = 0; c < assignment.cluster_count; ++c) {
    if (out.member_counts[c] == 0) throw std::invalid_argument("empty cluster");
    out.prototypes.row(c) /= static_cast<double>(out.member_counts[c]);
  }
  return out;
}

void ClusterSettings::validate() const {
  if (eps && !(*eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  if (!(eps_percentile >= 0.0 && eps_percentile <= 100.0)) {
    throw std::invalid_argument("eps percentile must lie in [0, 100]");
  }
  if (min_pts < 1) throw std::invalid_argument("min_pts must be >= 1");
}

bool ClusteringResult::any_clusters() const {
  return std::any_of(prototypes.begin(), prototypes.end(),
                     [](const PrototypeSet& p) { return !p.empty(); });
}

ClusteringResult cluster_all_samplings(std::span<const Matrix> instance_sets,
                                       const ClusterSettings& settings) {
  settings.validate();
  ClusteringResult out;
  for (std::size_t i = 0; i < instance_sets.size(); ++i) {
    const Matrix& points = instance_sets[i];
    const double eps =
        settings.eps ? *settings.eps
                     : std::max(kMinEps, knn_distance_percentile(points, settings.min_pts,
                                                                 settings.eps_percentile));
    ClusterAssignment a = dbscan(points, eps, settings.min_pts);
    a.sampling_index = static_cast<int>(i);
    out.prototypes.push_back(build_prototypes(points, a));
    out.assignments.push_back(std::move(a));
    out.eps_used.push_back(eps);
  }
  return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

}  // namespace simmc
