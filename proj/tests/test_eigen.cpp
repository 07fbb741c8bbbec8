#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "toothseg/eigen_solver.hpp"

using namespace toothseg;

namespace {

struct Accuracy {
  double residual = 0.0;     // max ||A v - lambda v|| / ||A||
  double orthogonality = 0.0;  // max |V^T V - I|
};

Accuracy accuracy(const Eigen::MatrixXd& a, const EigenDecomposition& e) {
  Accuracy out;
  const double norm = a.norm();
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    const double r = (a * e.vectors.col(k) - e.values[k] * e.vectors.col(k)).norm();
    out.residual = std::max(out.residual, r / norm);
  }
  const auto m = e.vectors.cols();
  out.orthogonality = (e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace

TEST_SUITE("eigen") {

TEST_CASE("two by two hand-solvable case") {
  const Eigen::MatrixXd a{{2, 1}, {1, 2}};
  for (const auto& e : {symmetric_eigen(a), symmetric_eigen_top(a, 2)}) {
    CHECK(std::abs(e.values[0] - 3.0) <= 1e-10);
    CHECK(std::abs(e.values[1] - 1.0) <= 1e-10);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(std::abs(e.vectors.col(0).dot(Eigen::Vector2d(s, s))) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(e.vectors.col(1).dot(Eigen::Vector2d(s, -s))) - 1.0) < 1e-12);
  }
}

TEST_CASE("diagonal and one by one matrices") {
  const Eigen::MatrixXd d = Eigen::Vector4d(3, -1, 7, 0).asDiagonal();
  const auto e = symmetric_eigen(d);
  CHECK(e.values == Eigen::Vector4d(7, 3, 0, -1));
  const Eigen::MatrixXd one{{-2.5}};
  CHECK(symmetric_eigen(one).values[0] == -2.5);
  CHECK(symmetric_eigen_top(one, 1).values[0] == -2.5);
}

TEST_CASE("random symmetric matrices: full decomposition") {
  Rng rng(1);
  for (int n = 1; n <= 50; ++n) {
    const auto a = oracle::random_symmetric(rng, n);
    const auto e = symmetric_eigen(a);
    const auto acc = accuracy(a, e);
    CHECK(acc.residual <= 1e-8);
    CHECK(acc.orthogonality <= 1e-8);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a, Eigen::EigenvaluesOnly);
    CHECK((e.values - ref.eigenvalues().reverse()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + a.norm()));
  }
}

TEST_CASE("random symmetric matrices: top eigenpairs") {
  Rng rng(2);
  for (int n = 1; n <= 50; ++n) {
    const auto a = oracle::random_symmetric(rng, n);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    const auto e = symmetric_eigen_top(a, m);
    REQUIRE(e.values.size() == m);
    const auto acc = accuracy(a, e);
    CHECK(acc.residual <= 1e-8);
    CHECK(acc.orthogonality <= 1e-8);
    const auto full = symmetric_eigen(a);
    CHECK((e.values - full.values.head(m)).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + a.norm()));
  }
}

TEST_CASE("repeated eigenvalues keep orthogonal vectors") {
  Rng rng(3);
  // Q diag(5, 5, 5, 1, 1, -2) Q^T with a random orthogonal Q.
  const Eigen::MatrixXd g = oracle::random_symmetric(rng, 6);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd lam(6);
  lam << 5, 5, 5, 1, 1, -2;
  const Eigen::MatrixXd a = q * lam.asDiagonal() * q.transpose();
  for (const auto& e : {symmetric_eigen(a), symmetric_eigen_top(a, 5)}) {
    const auto acc = accuracy(a, e);
    CHECK(acc.residual <= 1e-8);
    CHECK(acc.orthogonality <= 1e-8);
    CHECK(std::abs(e.values[0] - 5.0) < 1e-10);
    CHECK(std::abs(e.values[4] - 1.0) < 1e-10);
  }
}

TEST_CASE("tridiagonal reduction reproduces the matrix") {
  Rng rng(4);
  const auto a = oracle::random_symmetric(rng, 12);
  const Tridiagonalization tri(a);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(12, 12);
  t.diagonal() = tri.diagonal();
  t.diagonal(1) = tri.off_diagonal();
  t.diagonal(-1) = tri.off_diagonal();
  const Eigen::MatrixXd q = tri.q();
  CHECK((q * t * q.transpose() - a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-13);
  const auto values = tridiagonal_eigenvalues(tri.diagonal(), tri.off_diagonal());
  CHECK((values - symmetric_eigen(a).values).cwiseAbs().maxCoeff() < 1e-12);
}

}
