#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace toothseg {

/// Per-point component id; every id in [0, k) is used.
struct ClusterAssignment {
  std::vector<int> component;
  int k = 0;

  std::size_t size() const { return component.size(); }
};

struct KMeansOptions {
  int max_iterations = 300;
};

struct KMeansResult {
  ClusterAssignment assignment;
  Eigen::MatrixXd centers;  // k x dim
  // Sum of squared distances to the assigned center after each Lloyd update.
  std::vector<double> objective_history;
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing. Empty clusters are reseeded with the point farthest from its
/// center, so exactly k clusters are non-empty whenever k <= point count.
KMeansResult kmeans_pp(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                       const KMeansOptions& options = {});

double kmeans_objective(const Eigen::MatrixXd& points, const ClusterAssignment& assignment,
                        const Eigen::MatrixXd& centers);

}  // namespace toothseg
