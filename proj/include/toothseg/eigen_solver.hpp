#pragma once

#include <Eigen/Core>

namespace toothseg {

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order and
/// the matching unit eigenvectors as columns.
struct EigenDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// Householder reduction of a symmetric matrix to tridiagonal form
/// A = Q T Q^T. The reflectors are kept so vectors can be mapped back.
class Tridiagonalization {
 public:
  explicit Tridiagonalization(const Eigen::MatrixXd& symmetric);

  const Eigen::VectorXd& diagonal() const { return diag_; }
  const Eigen::VectorXd& off_diagonal() const { return off_; }

  /// Replaces Z (n x m) with Q Z.
  void apply_q(Eigen::MatrixXd& z) const;
  Eigen::MatrixXd q() const;

 private:
  Eigen::MatrixXd reflectors_;  // column k holds the reflector for step k below row k
  Eigen::VectorXd betas_;
  Eigen::VectorXd diag_;
  Eigen::VectorXd off_;
};

/// Full decomposition: tridiagonalization followed by implicit-shift QL with
/// accumulated rotations. Throws ConvergenceError if QL stalls.
EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& a);

/// The m largest eigenpairs: eigenvalues by implicit-shift QL on the
/// tridiagonal form, eigenvectors by inverse iteration on it (reorthogonalized
/// within clusters of close eigenvalues), mapped back through the reflectors.
/// Cost is dominated by the O(n^3) reduction; intended for n up to a few
/// thousand where only a few dozen vectors are needed.
EigenDecomposition symmetric_eigen_top(const Eigen::MatrixXd& a, Eigen::Index m);

/// Eigenvalues of a symmetric tridiagonal matrix, descending.
Eigen::VectorXd tridiagonal_eigenvalues(const Eigen::VectorXd& diag, const Eigen::VectorXd& off);

}  // namespace toothseg
