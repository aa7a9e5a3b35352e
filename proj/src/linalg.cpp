#include "opfv/linalg.hpp"

namespace opfv::linalg {

namespace {

Eigen::MatrixXd penalty_matrix(Eigen::Index dim, double lambda, const Eigen::VectorXd& penalized) {
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(dim, lambda);
  if (penalized.size() == dim) diag = lambda * penalized;
  return diag.asDiagonal();
}

}  // namespace

Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  return svd.solve(b);
}

Eigen::VectorXd ridge_solve_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                 double lambda, const Eigen::VectorXd& penalized) {
  const Eigen::MatrixXd sys = gram + penalty_matrix(gram.cols(), lambda, penalized);
  Eigen::LLT<Eigen::MatrixXd> llt(sys);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd w = llt.solve(rhs);
    if (w.allFinite()) return w;
  }
  return pinv_solve(sys, rhs);
}

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                            const Eigen::VectorXd& penalized) {
  return ridge_solve_gram(x.transpose() * x, x.transpose() * y, lambda, penalized);
}

double normal_equation_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                                const Eigen::VectorXd& w, const Eigen::VectorXd& penalized) {
  const Eigen::MatrixXd gram =
      x.transpose() * x + penalty_matrix(x.cols(), lambda, penalized);
  return ((gram * w - x.transpose() * y).cwiseAbs()).maxCoeff();
}

}  // namespace opfv::linalg
