#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "dsj/errors.hpp"

namespace dsj::linalg {

inline double relative_frobenius(const Eigen::MatrixXd& value, const Eigen::MatrixXd& reference) {
  const double denom = reference.norm();
  const double diff = (value - reference).norm();
  return denom > 0.0 ? diff / denom : diff;
}

inline bool is_square(const Eigen::MatrixXd& m) { return m.rows() == m.cols() && m.rows() > 0; }

inline bool is_diagonal(const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) return false;
  return true;
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
  if (!is_square(m)) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Eigenvalues of the symmetric part, ascending.
inline Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrize(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) { return symmetric_eigenvalues(m).minCoeff(); }
inline double max_eigenvalue(const Eigen::MatrixXd& m) { return symmetric_eigenvalues(m).maxCoeff(); }

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
/// `label` names the offending quantity in the error message.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const std::string& label) {
  if (!is_square(m)) throw ShapeError(label + " must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(m));
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw SingularityError(label + " is not positive definite or is numerically singular");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

/// Moore-Penrose inverse via SVD; singular values below `cutoff` times the largest are dropped.
inline Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double cutoff = 1e-10) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double largest = s.size() > 0 ? s(0) : 0.0;
  Eigen::MatrixXd s_inv = Eigen::MatrixXd::Zero(m.cols(), m.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff * largest) s_inv(i, i) = 1.0 / s(i);
  return svd.matrixV() * s_inv * svd.matrixU().transpose();
}

/// Ratio of smallest to largest singular value (0 for an empty or zero matrix).
inline double singular_value_ratio(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

}  // namespace dsj::linalg
