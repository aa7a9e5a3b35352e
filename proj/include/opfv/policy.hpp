#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>

#include "opfv/reward.hpp"
#include "opfv/timefeat.hpp"

namespace opfv {

// Conditional action distribution pi(a | x, t).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Eigen::VectorXd probs(const Eigen::VectorXd& x, Timestamp t) const = 0;
  double prob(const Eigen::VectorXd& x, Timestamp t, int action) const {
    return probs(x, t)[action];
  }
};

class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int n_actions) : n_actions_(n_actions) {}
  Eigen::VectorXd probs(const Eigen::VectorXd&, Timestamp) const override {
    return Eigen::VectorXd::Constant(n_actions_, 1.0 / n_actions_);
  }

 private:
  int n_actions_;
};

// Parametric softmax policy over encoded context features, optionally through
// one tanh hidden layer. Time-independent: the learned policy has no t input.
class SoftmaxPolicy final : public Policy {
 public:
  SoftmaxPolicy(int n_actions, int context_dim, int hidden_width = 0);
  static SoftmaxPolicy random_init(int n_actions, int context_dim, int hidden_width,
                                   std::uint64_t seed, double scale = 0.01);

  int n_actions() const { return n_actions_; }
  int context_dim() const { return context_dim_; }
  int hidden_width() const { return hidden_width_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  const Eigen::VectorXd& params() const { return params_; }
  void set_params(Eigen::VectorXd params);

  Eigen::VectorXd probs(const Eigen::VectorXd& x) const;
  Eigen::VectorXd probs(const Eigen::VectorXd& x, Timestamp) const override { return probs(x); }

  // score function grad_zeta log pi(a|x), flattened like params()
  Eigen::VectorXd score(const Eigen::VectorXd& x, int action) const;
  // grad += sum_a alpha[a] * grad_zeta log pi(a|x); the workhorse behind every
  // gradient estimator
  void add_weighted_score(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha,
                          Eigen::VectorXd& grad) const;

 private:
  Eigen::VectorXd feat(const Eigen::VectorXd& x) const;  // [x; 1]
  int n_actions_;
  int context_dim_;
  int hidden_width_;
  Eigen::VectorXd params_;
};

// pi(a|x) proportional to exp(beta * f(x, t_ref, a))
class RegressionPolicy final : public Policy {
 public:
  RegressionPolicy(RewardModel model, double beta, Timestamp t_ref, int n_actions);
  Eigen::VectorXd probs(const Eigen::VectorXd& x, Timestamp) const override;

 private:
  RewardModel model_;
  double beta_;
  Timestamp t_ref_;
  int n_actions_;
};

std::shared_ptr<Policy> reg_based_policy(RewardModel model, double beta_softmax, Timestamp t_ref,
                                         int n_actions);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace opfv
