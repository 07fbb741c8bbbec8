#include "toothseg/kmeans.hpp"

#include <limits>
#include <string>

#include "toothseg/common.hpp"

namespace toothseg {

namespace {

// Nearest center per point. On a tie a point keeps its `previous` center if
// that is among the nearest, otherwise the lowest index wins; without the
// first rule coincident points can cycle between equally near centers.
std::vector<int> assign_nearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                                std::vector<double>& dist, const std::vector<int>* previous = nullptr) {
  const Eigen::Index n = points.rows();
  std::vector<int> labels(static_cast<std::size_t>(n));
  dist.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double d = (points.row(i) - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    if (previous) {
      const int prev = (*previous)[static_cast<std::size_t>(i)];
      if ((points.row(i) - centers.row(prev)).squaredNorm() == best) best_c = prev;
    }
    labels[static_cast<std::size_t>(i)] = best_c;
    dist[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

// Moves the farthest point of a multi-member cluster into each empty cluster.
void repair_empty(const Eigen::MatrixXd& points, Eigen::MatrixXd& centers, std::vector<int>& labels,
                  std::vector<double>& dist) {
  const int k = static_cast<int>(centers.rows());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    std::size_t far = labels.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
      if (dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    if (far == labels.size()) break;  // more clusters than points
    --counts[static_cast<std::size_t>(labels[far])];
    labels[far] = c;
    ++counts[static_cast<std::size_t>(c)];
    dist[far] = 0.0;
    centers.row(c) = points.row(static_cast<Eigen::Index>(far));
  }
}

// Means are accumulated relative to each cluster's first member, so a cluster
// of coincident points gets that point back exactly.
void update_centers(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                    Eigen::MatrixXd& centers) {
  const auto k = static_cast<std::size_t>(centers.rows());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers.rows(), centers.cols());
  std::vector<int> counts(k, 0);
  std::vector<Eigen::Index> first(k, -1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    if (first[c] < 0) first[c] = static_cast<Eigen::Index>(i);
    sums.row(labels[i]) += points.row(static_cast<Eigen::Index>(i)) - points.row(first[c]);
    ++counts[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      const auto row = static_cast<Eigen::Index>(c);
      centers.row(row) = points.row(first[c]) + sums.row(row) / counts[c];
    }
  }
}

}  // namespace

double kmeans_objective(const Eigen::MatrixXd& points, const ClusterAssignment& assignment,
                        const Eigen::MatrixXd& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.component.size(); ++i) {
    total += (points.row(static_cast<Eigen::Index>(i)) - centers.row(assignment.component[i]))
                 .squaredNorm();
  }
  return total;
}

KMeansResult kmeans_pp(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                       const KMeansOptions& options) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw Error("k-means needs k >= 1, got " + std::to_string(k));
  if (k > n) {
    throw Error("k-means asked for " + std::to_string(k) + " clusters but only " +
                std::to_string(n) + " points were given");
  }
  if (!points.allFinite()) throw Error("k-means input contains non-finite values");

  Rng rng(seed);
  Eigen::MatrixXd centers(k, points.cols());
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Eigen::Index pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double d : nearest) total += d;
      if (total > 0.0) {
        double target = uniform01(rng) * total;
        pick = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          target -= nearest[static_cast<std::size_t>(i)];
          if (target < 0.0 && nearest[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
        if (pick < 0) {  // rounding left the draw past the end
          for (Eigen::Index i = n - 1; i >= 0; --i) {
            if (nearest[static_cast<std::size_t>(i)] > 0.0) {
              pick = i;
              break;
            }
          }
        }
      } else {
        // Every remaining point coincides with a center; take an unused one.
        std::vector<Eigen::Index> unused;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
        }
        pick = unused[uniform_index(rng, unused.size())];
      }
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (points.row(i) - centers.row(c)).squaredNorm();
      auto& slot = nearest[static_cast<std::size_t>(i)];
      if (d < slot) slot = d;
    }
  }

  KMeansResult result;
  std::vector<double> dist;
  std::vector<int> labels = assign_nearest(points, centers, dist);
  repair_empty(points, centers, labels, dist);
  update_centers(points, labels, centers);
  result.assignment.component = labels;
  result.assignment.k = k;
  result.objective_history.push_back(kmeans_objective(points, result.assignment, centers));
  result.iterations = 1;

  while (result.iterations < options.max_iterations) {
    std::vector<int> next = assign_nearest(points, centers, dist, &labels);
    repair_empty(points, centers, next, dist);
    if (next == labels) break;
    labels = std::move(next);
    update_centers(points, labels, centers);
    result.assignment.component = labels;
    result.objective_history.push_back(kmeans_objective(points, result.assignment, centers));
    ++result.iterations;
  }
  result.centers = std::move(centers);
  return result;
}

}  // namespace toothseg
