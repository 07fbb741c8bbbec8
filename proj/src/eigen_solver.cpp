#include "toothseg/eigen_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "toothseg/common.hpp"

namespace toothseg {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxQlIterations = 60;
constexpr int kMaxInverseIterations = 8;

void require_square_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw Error("eigensolver needs a square matrix, got " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()));
  }
  if (!a.allFinite()) throw Error("eigensolver input contains non-finite entries");
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw Error("eigensolver input is not symmetric (max |A - A^T| = " + std::to_string(asym) + ")");
  }
}

// Implicit-shift QL on the tridiagonal (diag, off). When `z` is non-null its
// columns receive the accumulated rotations. On return `diag` holds the
// eigenvalues, unsorted.
void tridiagonal_ql(Eigen::VectorXd& diag, const Eigen::VectorXd& off, Eigen::MatrixXd* z) {
  const Eigen::Index n = diag.size();
  if (n <= 1) return;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e.head(n - 1) = off;

  double shift_total = 0.0;
  double scale = 0.0;
  for (Eigen::Index l = 0; l < n; ++l) {
    scale = std::max(scale, std::abs(diag[l]) + std::abs(e[l]));
    Eigen::Index m = l;
    while (m < n - 1 && std::abs(e[m]) > kEps * scale) ++m;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kMaxQlIterations) {
          throw ConvergenceError("tridiagonal QL did not converge for eigenvalue " + std::to_string(l),
                                 std::abs(e[l]));
        }
        // Wilkinson-style shift from the leading 2x2 block.
        double g = diag[l];
        double p = (diag[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        diag[l] = e[l] / (p + r);
        diag[l + 1] = e[l] * (p + r);
        const double next = diag[l + 1];
        double h = g - diag[l];
        for (Eigen::Index i = l + 2; i < n; ++i) diag[i] -= h;
        shift_total += h;

        // Chase the bulge from m back to l with Givens rotations.
        p = diag[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * diag[i] - s * g;
          diag[i + 1] = h + s * (c * g + s * diag[i]);
          if (z != nullptr) {
            auto zi = z->col(i);
            auto zj = z->col(i + 1);
            for (Eigen::Index k = 0; k < z->rows(); ++k) {
              const double t = zj[k];
              zj[k] = s * zi[k] + c * t;
              zi[k] = c * zi[k] - s * t;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / next;
        e[l] = s * p;
        diag[l] = c * p;
      } while (std::abs(e[l]) > kEps * scale);
    }
    diag[l] += shift_total;
    e[l] = 0.0;
  }
}

std::vector<Eigen::Index> descending_order(const Eigen::VectorXd& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
  return order;
}

// LU factorization with partial pivoting of (T - shift I) for tridiagonal T.
class ShiftedTridiagonalLu {
 public:
  ShiftedTridiagonalLu(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, double shift,
                       double tiny)
      : n_(diag.size()), u1_(n_), u2_(n_), u3_(n_), mult_(n_), swapped_(static_cast<std::size_t>(n_)) {
    double dd = diag[0] - shift;
    double ss = n_ > 1 ? off[0] : 0.0;
    for (Eigen::Index i = 0; i + 1 < n_; ++i) {
      const double sub = off[i];
      const double nd = diag[i + 1] - shift;
      const double ns = i + 2 < n_ ? off[i + 1] : 0.0;
      if (std::abs(dd) >= std::abs(sub)) {
        swapped_[static_cast<std::size_t>(i)] = false;
        if (std::abs(dd) < tiny) dd = dd < 0 ? -tiny : tiny;
        const double m = sub / dd;
        mult_[i] = m;
        u1_[i] = dd;
        u2_[i] = ss;
        u3_[i] = 0.0;
        dd = nd - m * ss;
        ss = ns;
      } else {
        swapped_[static_cast<std::size_t>(i)] = true;
        const double m = dd / sub;
        mult_[i] = m;
        u1_[i] = sub;
        u2_[i] = nd;
        u3_[i] = ns;
        dd = ss - m * nd;
        ss = -m * ns;
      }
    }
    if (std::abs(dd) < tiny) dd = dd < 0 ? -tiny : tiny;
    u1_[n_ - 1] = dd;
    u2_[n_ - 1] = 0.0;
    u3_[n_ - 1] = 0.0;
  }

  void solve(Eigen::VectorXd& b) const {
    for (Eigen::Index i = 0; i + 1 < n_; ++i) {
      if (swapped_[static_cast<std::size_t>(i)]) std::swap(b[i], b[i + 1]);
      b[i + 1] -= mult_[i] * b[i];
    }
    for (Eigen::Index i = n_ - 1; i >= 0; --i) {
      double acc = b[i];
      if (i + 1 < n_) acc -= u2_[i] * b[i + 1];
      if (i + 2 < n_) acc -= u3_[i] * b[i + 2];
      b[i] = acc / u1_[i];
    }
  }

 private:
  Eigen::Index n_;
  Eigen::VectorXd u1_, u2_, u3_, mult_;
  std::vector<bool> swapped_;
};

double tridiagonal_residual(const Eigen::VectorXd& diag, const Eigen::VectorXd& off,
                            const Eigen::VectorXd& x, double lambda) {
  const Eigen::Index n = diag.size();
  double sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = (diag[i] - lambda) * x[i];
    if (i > 0) r += off[i - 1] * x[i - 1];
    if (i + 1 < n) r += off[i] * x[i + 1];
    sq += r * r;
  }
  return std::sqrt(sq);
}

}  // namespace

Tridiagonalization::Tridiagonalization(const Eigen::MatrixXd& symmetric) {
  require_square_symmetric(symmetric);
  const Eigen::Index n = symmetric.rows();
  reflectors_ = symmetric;
  betas_ = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n, 1));
  diag_.resize(n);
  off_ = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0));

  Eigen::VectorXd p, w;
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const Eigen::Index len = n - k - 1;
    auto x = reflectors_.col(k).tail(len);
    const double tail_sq = x.tail(len - 1).squaredNorm();
    const double x0 = x[0];
    double alpha = x0;
    double beta = 0.0;
    if (tail_sq > 0.0) {
      const double mu = std::sqrt(x0 * x0 + tail_sq);
      alpha = x0 <= 0.0 ? mu : -mu;
      const double v0 = x0 - alpha;
      x.tail(len - 1) /= v0;
      x[0] = 1.0;
      beta = 2.0 / (1.0 + tail_sq / (v0 * v0));
    } else {
      x.tail(len - 1).setZero();
      x[0] = 1.0;
    }
    betas_[k] = beta;
    off_[k] = alpha;

    if (beta != 0.0) {
      auto block = reflectors_.bottomRightCorner(len, len);
      p.noalias() = beta * (block.selfadjointView<Eigen::Lower>() * x);
      const double k_coef = 0.5 * beta * p.dot(x);
      w = p - k_coef * x;
      block.selfadjointView<Eigen::Lower>().rankUpdate(x, w, -1.0);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) diag_[i] = reflectors_(i, i);
  if (n >= 2) off_[n - 2] = reflectors_(n - 1, n - 2);
}

void Tridiagonalization::apply_q(Eigen::MatrixXd& z) const {
  const Eigen::Index n = diag_.size();
  Eigen::RowVectorXd proj;
  for (Eigen::Index k = n - 3; k >= 0; --k) {
    const double beta = betas_[k];
    if (beta == 0.0) continue;
    const Eigen::Index len = n - k - 1;
    const auto v = reflectors_.col(k).tail(len);
    auto rows = z.bottomRows(len);
    proj.noalias() = v.transpose() * rows;
    rows.noalias() -= (beta * v) * proj;
  }
}

Eigen::MatrixXd Tridiagonalization::q() const {
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(diag_.size(), diag_.size());
  apply_q(z);
  return z;
}

Eigen::VectorXd tridiagonal_eigenvalues(const Eigen::VectorXd& diag, const Eigen::VectorXd& off) {
  Eigen::VectorXd values = diag;
  tridiagonal_ql(values, off, nullptr);
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& a) {
  const Tridiagonalization tri(a);
  Eigen::VectorXd values = tri.diagonal();
  Eigen::MatrixXd vectors = tri.q();
  tridiagonal_ql(values, tri.off_diagonal(), &vectors);

  const auto order = descending_order(values);
  EigenDecomposition out;
  out.values.resize(values.size());
  out.vectors.resize(vectors.rows(), vectors.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.values[static_cast<Eigen::Index>(i)] = values[order[i]];
    out.vectors.col(static_cast<Eigen::Index>(i)) = vectors.col(order[i]);
  }
  return out;
}

EigenDecomposition symmetric_eigen_top(const Eigen::MatrixXd& a, Eigen::Index m) {
  if (m < 1 || m > a.rows()) {
    throw Error("requested " + std::to_string(m) + " eigenpairs of a " + std::to_string(a.rows()) +
                "x" + std::to_string(a.cols()) + " matrix");
  }
  const Tridiagonalization tri(a);
  const Eigen::VectorXd& diag = tri.diagonal();
  const Eigen::VectorXd& off = tri.off_diagonal();
  const Eigen::Index n = diag.size();

  const Eigen::VectorXd all = tridiagonal_eigenvalues(diag, off);
  double norm = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = std::abs(diag[i]);
    if (i > 0) row += std::abs(off[i - 1]);
    if (i + 1 < n) row += std::abs(off[i]);
    norm = std::max(norm, row);
  }
  norm = std::max(norm, std::numeric_limits<double>::min());
  const double tiny = kEps * norm;
  const double perturb = 10.0 * kEps * norm;
  const double cluster_gap = 1e-3 * norm;
  const double accept = 1e-12 * norm * std::sqrt(static_cast<double>(n));

  EigenDecomposition out;
  out.values = all.head(m);
  Eigen::MatrixXd z(n, m);
  Eigen::Index cluster_start = 0;
  double prev_shift = 0.0;
  Rng rng(0x5eed);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double lambda = all[j];
    double shift = lambda;
    if (j > 0) {
      if (all[j - 1] - lambda > cluster_gap) cluster_start = j;
      if (prev_shift - shift < perturb) shift = prev_shift - perturb;
    }
    prev_shift = shift;

    const ShiftedTridiagonalLu lu(diag, off, shift, tiny);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = uniform(rng, -1.0, 1.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kMaxInverseIterations; ++it) {
      lu.solve(x);
      for (Eigen::Index k = cluster_start; k < j; ++k) x -= z.col(k).dot(x) * z.col(k);
      const double len = x.norm();
      if (!(len > 0.0) || !std::isfinite(len)) {
        for (Eigen::Index i = 0; i < n; ++i) x[i] = uniform(rng, -1.0, 1.0);
        continue;
      }
      x /= len;
      residual = tridiagonal_residual(diag, off, x, lambda);
      if (it >= 1 && residual <= accept) break;
    }
    if (!(residual <= 1e-8 * norm)) {
      throw ConvergenceError("inverse iteration did not converge for eigenvalue " +
                                 std::to_string(lambda) + " (residual " +
                                 std::to_string(residual) + ")",
                             residual);
    }
    z.col(j) = x;
  }
  tri.apply_q(z);
  out.vectors = std::move(z);
  return out;
}

}  // namespace toothseg
