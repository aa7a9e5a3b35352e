#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

#include "opfv/dataset.hpp"
#include "opfv/policy.hpp"
#include "opfv/rng.hpp"
#include "opfv/timefeat.hpp"

namespace opfv {

struct EnvConfig {
  int context_dim = 10;
  int n_actions = 10;
  double lambda = 0.5;   // informativeness of the true time feature
  double alpha = 1.0;    // informativeness of the context time feature; 1 = stationary context
  double beta = 0.1;     // logging softmax inverse temperature
  double epsilon = 0.2;  // evaluation-policy noise
  double sigma = 1.0;    // reward noise std
  int true_seasons = 8;  // cardinality of phi_true (and phi_x)
  std::uint64_t seed = 0;
  Timestamp domain_end = 0;  // 0 -> end of Year 2

  void validate() const;
};

// Synthetic non-stationary environment: ground-truth expected reward
// q = lambda*g(x, phi_true(t), a) + (1-lambda)*h(x, t, a), logging and
// evaluation policies, and seeded sampling. Immutable after construction.
class SyntheticEnv {
 public:
  explicit SyntheticEnv(EnvConfig cfg = {});

  const EnvConfig& config() const;
  Timestamp horizon() const;  // T: end of the Year 1 logging window
  const TimeFeatureFn& phi_true() const;
  const TimeFeatureFn& phi_f() const;
  const TimeFeatureFn& phi_x() const;

  // per-timestamp quantities cached for repeated queries at a fixed t
  struct TimeCtx {
    Timestamp t;
    int season;     // phi_true(t)
    int dow;        // phi_f(t)
    double drift;   // normalized time s(t) for the context drift component
  };
  TimeCtx time_context(Timestamp t) const;

  double g(const Eigen::VectorXd& x, Timestamp t, int action) const;
  double h(const Eigen::VectorXd& x, Timestamp t, int action) const;
  double expected_reward(const Eigen::VectorXd& x, Timestamp t, int action) const;
  Eigen::VectorXd expected_rewards(const Eigen::VectorXd& x, const TimeCtx& tc) const;
  Eigen::VectorXd expected_rewards(const Eigen::VectorXd& x, Timestamp t) const;

  Eigen::VectorXd logging_probs(const Eigen::VectorXd& x, Timestamp t) const;
  Eigen::VectorXd evaluation_probs(const Eigen::VectorXd& x, Timestamp t, double epsilon) const;

  Eigen::VectorXd sample_context(Timestamp t, Rng& rng) const;
  LoggedDataset sample_logged_data(std::size_t n, std::uint64_t data_seed) const;

  struct ValueEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n_mc = 0;
  };
  // Monte Carlo V_{t'}(pi) = E_{p(x|t') pi(a|x,t')}[q(x,t',a)]; the action sum
  // is analytic, so no reward noise enters.
  ValueEstimate true_policy_value(const Policy& pi, Timestamp t_prime, std::size_t n_mc,
                                  std::uint64_t mc_seed) const;

  std::shared_ptr<Policy> logging_policy() const;
  std::shared_ptr<Policy> evaluation_policy(double epsilon) const;
  std::shared_ptr<Policy> evaluation_policy() const;  // at configured epsilon

  std::string to_json_string() const;
  static SyntheticEnv from_json_string(const std::string& text);

 private:
  struct Data;
  std::shared_ptr<const Data> d_;
};

}  // namespace opfv
