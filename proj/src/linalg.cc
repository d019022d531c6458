#include "mbandit/linalg.h"

#include <cmath>
#include <limits>

namespace mbandit {

double InfNorm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

Eigen::MatrixXd PseudoInverse(const Eigen::MatrixXd& m, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? rel_tol * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

// Returns sigma_min / sigma_max over the min(rows, cols) singular values.
double SingularRatio(const Eigen::JacobiSVD<Eigen::MatrixXd>& svd) {
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

}  // namespace

double InfNormConditionNumber(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  if (SingularRatio(svd) < 1e-12) return std::numeric_limits<double>::infinity();
  return InfNorm(m) * InfNorm(PseudoInverse(m));
}

PinvSolution PinvSolveInfNorm(const Eigen::MatrixXd& theta,
                              const Eigen::VectorXd& b) {
  if (theta.rows() != b.size()) {
    throw std::invalid_argument("pinv solve: row count of theta != size of b");
  }
  if (theta.size() == 0 || theta.isZero(0.0)) {
    throw std::invalid_argument("pinv solve: theta is all zero");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double ratio = SingularRatio(svd);
  if (ratio < 1e-12) {
    const double kappa = ratio == 0.0
                             ? std::numeric_limits<double>::infinity()
                             : InfNorm(theta) * InfNorm(PseudoInverse(theta, 0.0));
    throw IllConditionedError("pinv solve: theta is numerically rank deficient",
                              kappa);
  }
  const Eigen::MatrixXd pinv = PseudoInverse(theta);
  PinvSolution out;
  out.x = pinv * b;
  out.kappa = InfNorm(theta) * InfNorm(pinv);
  return out;
}

}  // namespace mbandit
