#pragma once

#include <Eigen/Dense>

namespace opfv::linalg {

// min-norm least-squares solution of A w = b via SVD; singular values below
// 1e-10 relative to the largest are treated as zero
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

// Ridge normal equations (X'X + L) w = X'y with L = lambda * diag(penalized).
// Cholesky first, pseudo-inverse fallback when the system is not positive
// definite. `penalized` of size 0 penalizes every coefficient.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                            const Eigen::VectorXd& penalized = Eigen::VectorXd());

// same solve from a pre-accumulated gram = X'X and rhs = X'y
Eigen::VectorXd ridge_solve_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                 double lambda, const Eigen::VectorXd& penalized = Eigen::VectorXd());

// residual ||(X'X + L) w - X'y||_inf of the ridge normal equations
double normal_equation_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                                const Eigen::VectorXd& w,
                                const Eigen::VectorXd& penalized = Eigen::VectorXd());

}  // namespace opfv::linalg
