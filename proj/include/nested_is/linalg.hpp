#ifndef NESTED_IS_LINALG_HPP
#define NESTED_IS_LINALG_HPP

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>
#include <Eigen/Jacobi>

#include "nested_is/error.hpp"
#include "nested_is/random.hpp"

namespace nis {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Absolute entrywise tolerance used by the symmetry precondition.
inline constexpr double kSymmetryTolerance = 1e-12;

/// Relative off-diagonal tolerance and sweep cap of the Jacobi eigensolver.
inline constexpr double kJacobiTolerance = 1e-12;
inline constexpr int kJacobiMaxSweeps = 100;

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::NotSquare,
                std::string(what) + " is " + shape_string(m.rows(), m.cols()));
  }
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& m, const char* what) {
  require_square(m, what);
  const auto asym = (m - m.transpose()).cwiseAbs();
  if (m.size() > 0 && asym.maxCoeff() > kSymmetryTolerance) {
    throw Error(ErrorKind::NotSymmetric,
                std::string(what) + " deviates from symmetry by " + std::to_string(asym.maxCoeff()));
  }
}

template <typename Derived>
void require_dims(const Eigen::MatrixBase<Derived>& m, Index rows, Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " is " +
                                                  shape_string(m.rows(), m.cols()) + ", expected " +
                                                  shape_string(rows, cols));
  }
}

/// Symmetrized copy, (M + M^T) / 2. Used on covariances assembled from
/// products, whose rounding asymmetry can exceed the symmetry tolerance.
template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Lower Cholesky factor L (L L^T = M) of a symmetric positive definite
/// matrix, together with log|M|.
template <typename Scalar>
class SpdFactor {
 public:
  SpdFactor() = default;
  SpdFactor(Matrix<Scalar> lower, bool diagonal) : lower_(std::move(lower)), diagonal_(diagonal) {
    log_det_ = Scalar(2) * lower_.diagonal().array().log().sum();
  }

  Index dim() const noexcept { return lower_.rows(); }
  const Matrix<Scalar>& lower_factor() const noexcept { return lower_; }
  Scalar log_det() const noexcept { return log_det_; }
  Scalar det() const { return std::exp(log_det_); }
  bool is_diagonal() const noexcept { return diagonal_; }

  /// L v.
  template <typename Derived>
  Vector<Scalar> apply(const Eigen::MatrixBase<Derived>& v) const {
    if (diagonal_) return lower_.diagonal().cwiseProduct(v);
    return lower_.template triangularView<Eigen::Lower>() * v;
  }

  /// L^{-1} v by forward substitution.
  template <typename Derived>
  Vector<Scalar> solve_lower(const Eigen::MatrixBase<Derived>& v) const {
    if (v.size() != dim()) {
      throw Error(ErrorKind::DimensionMismatch, "solve_lower: vector length " +
                                                    std::to_string(v.size()) + " vs dim " +
                                                    std::to_string(dim()));
    }
    if (diagonal_) return v.cwiseQuotient(lower_.diagonal());
    return lower_.template triangularView<Eigen::Lower>().solve(v);
  }

  /// v^T M^{-1} v.
  template <typename Derived>
  Scalar quad_form(const Eigen::MatrixBase<Derived>& v) const {
    return solve_lower(v).squaredNorm();
  }

  /// M^{-1} B for a matrix right-hand side.
  template <typename Derived>
  Matrix<Scalar> solve(const Eigen::MatrixBase<Derived>& rhs) const {
    const auto tri = lower_.template triangularView<Eigen::Lower>();
    Matrix<Scalar> tmp = tri.solve(rhs);
    return tri.transpose().solve(tmp);
  }

  Matrix<Scalar> inverse() const { return solve(Matrix<Scalar>::Identity(dim(), dim())); }

  Matrix<Scalar> reconstruct() const { return lower_ * lower_.transpose(); }

 private:
  Matrix<Scalar> lower_;
  Scalar log_det_ = Scalar(0);
  bool diagonal_ = false;
};

/// Cholesky factorization without pivoting or jitter. A non-positive pivot
/// raises NotSpd.
template <typename Derived>
SpdFactor<typename Derived::Scalar> chol_spd(const Eigen::MatrixBase<Derived>& matrix) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(matrix, "chol_spd input");
  const Index n = matrix.rows();
  if (n == 0) throw Error(ErrorKind::NotSpd, "chol_spd: empty matrix");
  if (!matrix.allFinite()) throw Error(ErrorKind::NotSpd, "chol_spd: non-finite entries");

  bool diagonal = true;
  for (Index j = 0; j < n && diagonal; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j && matrix(i, j) != Scalar(0)) {
        diagonal = false;
        break;
      }

  Matrix<Scalar> lower = Matrix<Scalar>::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    Scalar pivot = matrix(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(pivot > Scalar(0))) {
      throw Error(ErrorKind::NotSpd,
                  "chol_spd: pivot " + std::to_string(static_cast<double>(pivot)) + " at column " +
                      std::to_string(j));
    }
    const Scalar ljj = std::sqrt(pivot);
    lower(j, j) = ljj;
    if (diagonal) continue;
    for (Index i = j + 1; i < n; ++i) {
      lower(i, j) = (matrix(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j))) / ljj;
    }
  }
  return SpdFactor<Scalar>(std::move(lower), diagonal);
}

/// Eigenvalues of a symmetric matrix, descending, by cyclic Jacobi sweeps.
template <typename Derived>
Vector<typename Derived::Scalar> sym_eigvals(const Eigen::MatrixBase<Derived>& matrix) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(matrix, "sym_eigvals input");
  Matrix<Scalar> a = symmetrized(matrix);
  const Index n = a.rows();

  const Scalar scale = a.norm();
  auto off_norm = [&] {
    Scalar sum(0);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (i != j) sum += a(i, j) * a(i, j);
    return std::sqrt(sum);
  };

  int sweep = 0;
  while (off_norm() > Scalar(kJacobiTolerance) * scale) {
    if (sweep++ == kJacobiMaxSweeps) {
      throw Error(ErrorKind::ConvergenceFailure,
                  "sym_eigvals: no convergence after " + std::to_string(kJacobiMaxSweeps) +
                      " sweeps");
    }
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
      }
    }
  }

  Vector<Scalar> values = a.diagonal();
  std::sort(values.data(), values.data() + n, std::greater<Scalar>());
  return values;
}

template <typename Derived>
typename Derived::Scalar max_eigval(const Eigen::MatrixBase<Derived>& matrix) {
  return sym_eigvals(matrix)(0);
}

template <typename Derived>
typename Derived::Scalar min_eigval(const Eigen::MatrixBase<Derived>& matrix) {
  const auto values = sym_eigvals(matrix);
  return values(values.size() - 1);
}

/// Largest singular value, from the smaller of the two Gram matrices.
template <typename Derived>
typename Derived::Scalar max_singular_value(const Eigen::MatrixBase<Derived>& matrix) {
  using Scalar = typename Derived::Scalar;
  if (matrix.size() == 0) return Scalar(0);
  const Matrix<Scalar> gram = matrix.rows() <= matrix.cols()
                                  ? Matrix<Scalar>(matrix * matrix.transpose())
                                  : Matrix<Scalar>(matrix.transpose() * matrix);
  return std::sqrt(std::max(Scalar(0), max_eigval(symmetrized(gram))));
}

/// log N(point; mean, L L^T).
template <typename Scalar, typename D1, typename D2>
Scalar mvn_logpdf(const Eigen::MatrixBase<D1>& point, const Eigen::MatrixBase<D2>& mean,
                  const SpdFactor<Scalar>& cov_factor) {
  const Index d = cov_factor.dim();
  if (point.size() != d || mean.size() != d) {
    throw Error(ErrorKind::DimensionMismatch, "mvn_logpdf: point " + std::to_string(point.size()) +
                                                  ", mean " + std::to_string(mean.size()) +
                                                  ", covariance " + std::to_string(d));
  }
  const Scalar log_two_pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  return Scalar(-0.5) *
         (Scalar(d) * log_two_pi + cov_factor.log_det() + cov_factor.quad_form(point - mean));
}

/// Fills `out` with i.i.d. standard normal draws.
template <typename Derived>
void fill_standard_normal(Rng& rng, Eigen::MatrixBase<Derived>& out) {
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = rng.normal();
}

/// `count` draws of mean + L eps, one per column.
template <typename Scalar, typename Derived>
Matrix<Scalar> mvn_sample(Rng& rng, const Eigen::MatrixBase<Derived>& mean,
                          const SpdFactor<Scalar>& cov_factor, Index count) {
  if (count < 1) throw Error(ErrorKind::InvalidSpec, "mvn_sample: count must be >= 1");
  const Index d = cov_factor.dim();
  if (mean.size() != d) {
    throw Error(ErrorKind::DimensionMismatch, "mvn_sample: mean " + std::to_string(mean.size()) +
                                                  ", covariance " + std::to_string(d));
  }
  Matrix<Scalar> eps(d, count);
  fill_standard_normal(rng, eps);
  Matrix<Scalar> draws = cov_factor.is_diagonal()
                             ? Matrix<Scalar>(cov_factor.lower_factor().diagonal().asDiagonal() * eps)
                             : Matrix<Scalar>(cov_factor.lower_factor().template triangularView<Eigen::Lower>() * eps);
  draws.colwise() += mean;
  return draws;
}

/// log(sum exp(v)), stable for entries down to -inf.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar peak = v.maxCoeff();
  if (!std::isfinite(peak)) return peak;
  return peak + std::log((v.derived().array() - peak).exp().sum());
}

}  // namespace nis

#endif  // NESTED_IS_LINALG_HPP
