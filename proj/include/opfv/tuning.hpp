#pragma once

#include <string>
#include <vector>

#include "opfv/estimators.hpp"

namespace opfv {

// Ordered candidate features; `finest` must refine every other candidate,
// which is validated on sampled timestamp pairs.
class CandidateSet {
 public:
  CandidateSet(std::vector<TimeFeatureFn> candidates, std::size_t finest_index,
               std::uint64_t validation_seed = 0);

  const std::vector<TimeFeatureFn>& candidates() const { return candidates_; }
  std::size_t finest_index() const { return finest_; }
  const TimeFeatureFn& finest() const { return candidates_[finest_]; }

 private:
  std::vector<TimeFeatureFn> candidates_;
  std::size_t finest_;
};

// difference of the estimator under phi and under the finest candidate
double estimate_bias(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                     const TimeFeatureFn& phi, const TimeFeatureFn& phi_inf,
                     const RewardModel& model, const TimeDistribution& pt);

// sample variance of the per-sample terms divided by n
double estimate_variance(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                         const TimeFeatureFn& phi, const RewardModel& model,
                         const TimeDistribution& pt);

struct CandidateScore {
  std::string phi_id;
  int cardinality = 0;
  double bias_hat = 0.0;
  double var_hat = 0.0;
  double score = 0.0;
  bool supported = true;  // p(phi(t')) > 0
  bool selected = false;
};

struct TuneResult {
  std::size_t selected_index = 0;
  std::vector<CandidateScore> table;
};

// argmin over supported candidates of bias^2 + variance; ties break toward
// the coarser candidate
TuneResult tune_phi(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                    const CandidateSet& candidates, const RewardModel& model,
                    const TimeDistribution& pt);

}  // namespace opfv
