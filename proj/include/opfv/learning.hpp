#pragma once

#include <functional>
#include <vector>

#include "opfv/estimators.hpp"
#include "opfv/policy.hpp"

namespace opfv {

// ---- policy-gradient estimators (gradients share the shape of the policy
// parameters; each has a matching scalar objective used by finite-difference
// checks and diagnostics) ----

Eigen::VectorXd ips_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi);
double ips_objective(const LoggedDataset& ds, const SoftmaxPolicy& pi);

Eigen::VectorXd dr_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi, const RewardModel& model);
double dr_objective(const LoggedDataset& ds, const SoftmaxPolicy& pi, const RewardModel& model);

Eigen::VectorXd opfv_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi, Timestamp t_prime,
                        const TimeFeatureFn& phi, const RewardModel& model,
                        const TimeDistribution& pt);
double opfv_pg_objective(const LoggedDataset& ds, const SoftmaxPolicy& pi, Timestamp t_prime,
                         const TimeFeatureFn& phi, const RewardModel& model,
                         const TimeDistribution& pt);

// weighted sum over period slices of per-slice ips_pg; the weights are the
// Fourier OLS hat row and do not depend on the policy
Eigen::VectorXd prognosticator_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi, int periods,
                                  int delta, int d_prime);

// gradient of -1/n sum log(pi(a_i|x_i) / pi_0(a_i|x_i,t_i)); the logging terms
// do not depend on the parameters
Eigen::VectorXd iml_gradient(const LoggedDataset& ds, const SoftmaxPolicy& pi);
double iml_value(const LoggedDataset& ds, const SoftmaxPolicy& pi);

using GradientFn =
    std::function<Eigen::VectorXd(const LoggedDataset&, const SoftmaxPolicy&)>;

struct TrainConfig {
  double learning_rate = 0.05;
  int iterations = 100;
  double pessimism_rho = 0.0;  // weight of the IML regularizer
  std::uint64_t seed = 0;
  int minibatch = 0;  // 0 = full batch
  GradientFn gradient;
  // optional probe evaluated once per iteration (e.g. oracle policy value)
  std::function<double(const SoftmaxPolicy&)> probe;

  void validate() const;
};

struct TrainLog {
  std::vector<double> grad_norm;
  std::vector<double> probe_value;  // empty when no probe configured
};

struct TrainResult {
  SoftmaxPolicy policy;
  TrainLog log;
};

// full-batch gradient ascent; deterministic given the config seed
TrainResult train(const LoggedDataset& ds, SoftmaxPolicy initial, const TrainConfig& cfg);

}  // namespace opfv
