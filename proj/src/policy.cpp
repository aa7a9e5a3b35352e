#include "opfv/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "opfv/rng.hpp"

namespace opfv {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

SoftmaxPolicy::SoftmaxPolicy(int n_actions, int context_dim, int hidden_width)
    : n_actions_(n_actions), context_dim_(context_dim), hidden_width_(hidden_width) {
  if (n_actions < 1 || context_dim < 0 || hidden_width < 0)
    throw std::invalid_argument("invalid softmax policy shape");
  const int d = context_dim_ + 1;
  const int count =
      hidden_width_ > 0 ? hidden_width_ * d + n_actions_ * hidden_width_ : n_actions_ * d;
  params_ = Eigen::VectorXd::Zero(count);
}

SoftmaxPolicy SoftmaxPolicy::random_init(int n_actions, int context_dim, int hidden_width,
                                         std::uint64_t seed, double scale) {
  SoftmaxPolicy p(n_actions, context_dim, hidden_width);
  Rng rng(seed, "policy-init");
  for (Eigen::Index i = 0; i < p.params_.size(); ++i) p.params_[i] = rng.normal(0.0, scale);
  return p;
}

void SoftmaxPolicy::set_params(Eigen::VectorXd params) {
  if (params.size() != params_.size()) throw std::invalid_argument("parameter size mismatch");
  params_ = std::move(params);
}

Eigen::VectorXd SoftmaxPolicy::feat(const Eigen::VectorXd& x) const {
  Eigen::VectorXd e(context_dim_ + 1);
  e.head(context_dim_) = x;
  e[context_dim_] = 1.0;
  return e;
}

Eigen::VectorXd SoftmaxPolicy::probs(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd e = feat(x);
  const int d = context_dim_ + 1;
  if (hidden_width_ == 0) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z(
        params_.data(), n_actions_, d);
    return softmax(z * e);
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z1(
      params_.data(), hidden_width_, d);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z2(
      params_.data() + hidden_width_ * d, n_actions_, hidden_width_);
  const Eigen::VectorXd u = (z1 * e).array().tanh();
  return softmax(z2 * u);
}

void SoftmaxPolicy::add_weighted_score(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha,
                                       Eigen::VectorXd& grad) const {
  // sum_a alpha_a * grad log pi(a|x) back-propagated through the logits:
  // d/d logit_b = alpha_b - pi_b * sum_a alpha_a
  const Eigen::VectorXd e = feat(x);
  const int d = context_dim_ + 1;
  const Eigen::VectorXd p = probs(x);
  const Eigen::VectorXd dlogit = alpha - p * alpha.sum();

  if (hidden_width_ == 0) {
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(
        grad.data(), n_actions_, d);
    g.noalias() += dlogit * e.transpose();
    return;
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z1(
      params_.data(), hidden_width_, d);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z2(
      params_.data() + hidden_width_ * d, n_actions_, hidden_width_);
  const Eigen::VectorXd u = (z1 * e).array().tanh();
  const Eigen::VectorXd du = z2.transpose() * dlogit;
  const Eigen::VectorXd dpre = du.array() * (1.0 - u.array().square());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g1(
      grad.data(), hidden_width_, d);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g2(
      grad.data() + hidden_width_ * d, n_actions_, hidden_width_);
  g1.noalias() += dpre * e.transpose();
  g2.noalias() += dlogit * u.transpose();
}

Eigen::VectorXd SoftmaxPolicy::score(const Eigen::VectorXd& x, int action) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n_actions_);
  alpha[action] = 1.0;
  add_weighted_score(x, alpha, grad);
  return grad;
}

RegressionPolicy::RegressionPolicy(RewardModel model, double beta, Timestamp t_ref, int n_actions)
    : model_(std::move(model)), beta_(beta), t_ref_(t_ref), n_actions_(n_actions) {
  if (!std::isfinite(beta)) throw std::invalid_argument("regression policy beta must be finite");
}

Eigen::VectorXd RegressionPolicy::probs(const Eigen::VectorXd& x, Timestamp) const {
  Eigen::VectorXd logits(n_actions_);
  for (int a = 0; a < n_actions_; ++a) logits[a] = beta_ * model_.predict(x, t_ref_, a);
  return softmax(logits);
}

std::shared_ptr<Policy> reg_based_policy(RewardModel model, double beta_softmax, Timestamp t_ref,
                                         int n_actions) {
  return std::make_shared<RegressionPolicy>(std::move(model), beta_softmax, t_ref, n_actions);
}

}  // namespace opfv
