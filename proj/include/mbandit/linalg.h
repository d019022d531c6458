#ifndef MBANDIT_LINALG_H_
#define MBANDIT_LINALG_H_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mbandit {

// Thrown when a matrix is numerically rank deficient: its smallest singular
// value is below 1e-12 times the largest.
class IllConditionedError : public std::runtime_error {
 public:
  IllConditionedError(const std::string& what, double kappa)
      : std::runtime_error(what), kappa_(kappa) {}
  double kappa() const { return kappa_; }

 private:
  double kappa_;
};

// Max absolute row sum.
double InfNorm(const Eigen::MatrixXd& m);

// Moore-Penrose pseudo-inverse via SVD. Singular values at or below
// `rel_tol * sigma_max` are treated as zero.
Eigen::MatrixXd PseudoInverse(const Eigen::MatrixXd& m, double rel_tol = 1e-12);

// kappa_inf(m) = |m|_inf * |pinv(m)|_inf; +inf for a rank-deficient m.
double InfNormConditionNumber(const Eigen::MatrixXd& m);

struct PinvSolution {
  Eigen::VectorXd x;
  double kappa = 1.0;
};

// Minimum-norm least-squares solution x = pinv(theta) * b together with the
// infinity-norm condition number of theta. Throws std::invalid_argument for an
// all-zero or dimension-mismatched input and IllConditionedError when theta is
// numerically rank deficient.
PinvSolution PinvSolveInfNorm(const Eigen::MatrixXd& theta,
                              const Eigen::VectorXd& b);

}  // namespace mbandit

#endif  // MBANDIT_LINALG_H_
