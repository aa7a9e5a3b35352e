#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "opfv/dataset.hpp"
#include "opfv/policy.hpp"
#include "opfv/reward.hpp"
#include "opfv/timefeat.hpp"

namespace opfv {

// Condition violation: p(phi(t')) = 0, or a forecast target feature that was
// never observed among the fitted periods.
class SupportViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimateDiagnostics {
  double min_weight = 0.0;
  double max_weight = 0.0;
  double indicator_fraction = 1.0;  // share of records with matching time feature
  double p_phi = 1.0;               // marginal probability used in the weight
};

struct EstimateResult {
  double value = 0.0;
  std::vector<double> per_sample_terms;  // empty for forecast-style estimators
  EstimateDiagnostics diagnostics;
};

EstimateResult ips(const LoggedDataset& ds, const Policy& pi_e);

EstimateResult dr_naive(const LoggedDataset& ds, const Policy& pi_e, const RewardModel& model);

// The future-value estimator: indicator/p(phi(t')) weighting on the residual
// term plus the model term, both with the evaluation policy taken at t'.
EstimateResult opfv(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                    const TimeFeatureFn& phi, const RewardModel& model,
                    const TimeDistribution& pt);

// Variant for non-stationary context: joint feature weight on the residual
// term, context-feature weight on the model term.
EstimateResult opfv_extended(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                             const TimeFeatureFn& phi_x, const TimeFeatureFn& phi_r,
                             const RewardModel& model, const TimeDistribution& pt);

enum class InnerEstimator { kIps, kDr };

struct PrognosticatorConfig {
  int periods = 8;   // K contiguous equal slices of [0, horizon)
  int delta = 1;     // forecast K + delta
  int d_prime = 3;   // Fourier harmonics
  InnerEstimator inner = InnerEstimator::kIps;
  const RewardModel* model = nullptr;  // required for the DR inner estimator
};

// Per-period value estimates forecast forward by least squares on a Fourier
// basis of the period index.
EstimateResult prognosticator(const LoggedDataset& ds, const Policy& pi_e,
                              const PrognosticatorConfig& cfg);

// One-hot forecast over a feature of the period index; reduces to group means.
EstimateResult prognosticator_phi(const LoggedDataset& ds, const Policy& pi_e,
                                  const std::vector<int>& phi_p, int periods, int delta,
                                  InnerEstimator inner = InnerEstimator::kIps,
                                  const RewardModel* model = nullptr);

// Fourier basis value psi(k) in R^{2*d_prime+1} for horizon K+delta
Eigen::VectorXd fourier_basis(int k, int periods_plus_delta, int d_prime);
// OLS hat row: forecast = sum_k weights[k] * Y_k
Eigen::VectorXd prognosticator_weights(int periods, int delta, int d_prime);
// record index ranges of the K contiguous equal time slices of [0, horizon)
std::vector<std::vector<std::size_t>> period_slices(const LoggedDataset& ds, int periods);

// evaluators for scoring learned policies on held-out logs
double dm(const LoggedDataset& ds, const Policy& pi, const RewardModel& model);
double snips(const LoggedDataset& ds, const Policy& pi);
double sndr(const LoggedDataset& ds, const Policy& pi, const RewardModel& model);

}  // namespace opfv
