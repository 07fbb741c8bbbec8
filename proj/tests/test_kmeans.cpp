#include <doctest.h>

#include <set>

#include "toothseg/common.hpp"
#include "toothseg/kmeans.hpp"

using namespace toothseg;

namespace {

Eigen::MatrixXd random_points(Rng& rng, int n, int dim) {
  Eigen::MatrixXd p(n, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = uniform(rng, -1, 1);
  return p;
}

std::size_t nonempty(const ClusterAssignment& a) {
  return std::set<int>(a.component.begin(), a.component.end()).size();
}

}  // namespace

TEST_SUITE("kmeans") {

TEST_CASE("objective never increases across Lloyd iterations") {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const int n = 5 + static_cast<int>(uniform_index(rng, 60));
    const int dim = 1 + static_cast<int>(uniform_index(rng, 5));
    const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(std::min(n, 10))));
    const auto points = random_points(rng, n, dim);
    const auto r = kmeans_pp(points, k, rng());
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
      REQUIRE(r.objective_history[i] <= r.objective_history[i - 1] * (1.0 + 1e-12));
    }
    CHECK(nonempty(r.assignment) == static_cast<std::size_t>(k));
  }
}

TEST_CASE("two separated blobs are recovered") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd points(20, 2);
    for (int i = 0; i < 20; ++i) {
      const double cx = i < 10 ? 0.0 : 100.0;
      points(i, 0) = cx + uniform(rng, -1, 1);
      points(i, 1) = uniform(rng, -1, 1);
    }
    const auto r = kmeans_pp(points, 2, static_cast<std::uint64_t>(t));
    // Brute force over every 2-partition: the blob split has the lowest objective.
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_mask = 0;
    for (std::uint32_t mask = 1; mask < (1u << 19); ++mask) {
      Eigen::Vector2d s[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
      double sq = 0.0;
      int count[2] = {0, 0};
      for (int i = 0; i < 20; ++i) {
        const int side = (mask >> i) & 1u;
        s[side] += points.row(i).transpose();
        ++count[side];
        sq += points.row(i).squaredNorm();
      }
      double obj = sq;
      for (int side = 0; side < 2; ++side) obj -= s[side].squaredNorm() / count[side];
      if (obj < best) {
        best = obj;
        best_mask = mask;
      }
    }
    for (int i = 0; i < 20; ++i) {
      const bool same_as_first = r.assignment.component[static_cast<std::size_t>(i)] == r.assignment.component[0];
      const bool oracle_same = ((best_mask >> i) & 1u) == (best_mask & 1u);
      CHECK(same_as_first == oracle_same);
    }
  }
}

TEST_CASE("k equal to the point count isolates every point") {
  Rng rng(3);
  const auto points = random_points(rng, 12, 3);
  const auto r = kmeans_pp(points, 12, 5);
  CHECK(nonempty(r.assignment) == 12);
  CHECK(kmeans_objective(points, r.assignment, r.centers) == 0.0);
}

TEST_CASE("a single cluster sits at the mean") {
  Rng rng(4);
  const auto points = random_points(rng, 30, 4);
  const auto r = kmeans_pp(points, 1, 9);
  CHECK((r.centers.row(0) - points.colwise().mean()).norm() < 1e-14);
}

TEST_CASE("duplicate points still give exactly k clusters") {
  Eigen::MatrixXd points = Eigen::MatrixXd::Zero(40, 2);
  for (int i = 0; i < 40; ++i) points(i, 0) = i < 30 ? 0.0 : static_cast<double>(i);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = kmeans_pp(points, 11, seed);
    CHECK(nonempty(r.assignment) == 11);
    CHECK(r.assignment.k == 11);
  }
}

TEST_CASE("more clusters than distinct points converge without cycling") {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const int n = 10 + static_cast<int>(uniform_index(rng, 40));
    const int dim = 1 + static_cast<int>(uniform_index(rng, 4));
    const auto sites = random_points(rng, 3, dim);
    Eigen::MatrixXd points(n, dim);
    for (int i = 0; i < n; ++i) points.row(i) = sites.row(i % 3);
    const int k = 4 + static_cast<int>(uniform_index(rng, 6));
    const auto r = kmeans_pp(points, k, rng());
    CHECK(r.iterations < KMeansOptions{}.max_iterations);
    CHECK(r.objective_history.back() == 0.0);
    CHECK(nonempty(r.assignment) == static_cast<std::size_t>(k));
  }
}

TEST_CASE("seeded runs are identical") {
  Rng rng(5);
  const auto points = random_points(rng, 200, 6);
  const auto a = kmeans_pp(points, 9, 42);
  const auto b = kmeans_pp(points, 9, 42);
  CHECK(a.assignment.component == b.assignment.component);
  CHECK(a.objective_history == b.objective_history);
}

TEST_CASE("invalid requests") {
  Rng rng(6);
  const auto points = random_points(rng, 5, 2);
  CHECK_THROWS_AS(kmeans_pp(points, 6, 1), Error);
  CHECK_THROWS_AS(kmeans_pp(points, 0, 1), Error);
}

}
