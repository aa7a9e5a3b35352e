#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "opfv/dataset.hpp"
#include "opfv/timefeat.hpp"

namespace opfv {

// Maps contexts to equality-comparable cells; pairwise regression matches on
// cells instead of exact context values. `n_cells > 0` means keys are dense
// indices usable as one-hot features.
struct ContextBinner {
  std::function<std::int64_t(const Eigen::VectorXd&)> key;
  int n_cells = 0;

  static ContextBinner per_dimension_sign(int context_dim);
  static ContextBinner single_dimension_sign(int dim);
};

struct EncoderSpec {
  bool context = true;
  bool intercept = true;
  bool action = true;
  std::optional<TimeFeatureFn> phi;  // one-hot phi(t)
  bool phi_action = false;           // one-hot (phi(t), a)
  std::optional<ContextBinner> cell; // dense binner for the cell blocks below
  bool cell_phi = false;
  bool cell_phi_action = false;
};

class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  FeatureEncoder(EncoderSpec spec, int n_actions, int context_dim);

  int dim() const { return dim_; }
  Eigen::VectorXd encode(const Eigen::VectorXd& x, Timestamp t, int action) const;
  // 1 for penalized coefficients, 0 for the intercept
  Eigen::VectorXd penalty_mask() const;

 private:
  EncoderSpec spec_;
  int n_actions_ = 0;
  int context_dim_ = 0;
  int dim_ = 0;
};

using RewardFn = std::function<double(const Eigen::VectorXd&, Timestamp, int)>;

// Reward regressor f(x, t, a).
class RewardModel {
 public:
  enum class Kind { kZero, kDirect, kTwoStage, kOracle };

  static RewardModel zero();
  static RewardModel oracle(RewardFn q);

  Kind kind() const { return kind_; }
  double predict(const Eigen::VectorXd& x, Timestamp t, int action) const;
  // additive decomposition of a two-stage model; for other kinds g_part is
  // the full prediction and h_part is 0
  double g_part(const Eigen::VectorXd& x, Timestamp t, int action) const;
  double h_part(const Eigen::VectorXd& x, Timestamp t, int action) const;
  bool degraded_to_direct() const { return degraded_; }

  struct LinearPart {
    FeatureEncoder encoder;
    Eigen::VectorXd weights;
    double ridge = 0.0;
  };
  const LinearPart* direct_part() const;  // direct or two-stage g
  const LinearPart* residual_part() const;

 private:
  friend RewardModel fit_direct(const LoggedDataset&, const TimeFeatureFn&,
                                const struct DirectFitConfig&);
  friend RewardModel fit_two_stage(const LoggedDataset&, const TimeFeatureFn&,
                                   const struct TwoStageConfig&);
  Kind kind_ = Kind::kZero;
  RewardFn oracle_;
  std::optional<LinearPart> g_;
  std::optional<LinearPart> h_;
  Timestamp fit_horizon_ = 0;  // h contribution is zeroed beyond this
  bool degraded_ = false;
};

struct DirectFitConfig {
  double ridge = 1.0;
  bool phi_action_interaction = true;
};

// Ridge regression of r on [x (+) onehot(phi_f(t)) (+) onehot(a) (+)
// onehot(phi_f(t) x a)] with an unpenalized intercept.
RewardModel fit_direct(const LoggedDataset& ds, const TimeFeatureFn& phi_f,
                       const DirectFitConfig& cfg = {});

struct PairRecord {
  std::size_t i = 0, j = 0;  // record indices
  int action = 0;
  int feature = 0;           // shared phi cluster
  std::int64_t cell = 0;
  Timestamp t_i = 0, t_j = 0;
  double r_i = 0.0, r_j = 0.0;
};

class PairDataset {
 public:
  PairDataset() = default;
  explicit PairDataset(std::vector<PairRecord> pairs) : pairs_(std::move(pairs)) {}
  const std::vector<PairRecord>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

 private:
  std::vector<PairRecord> pairs_;
};

struct PairConfig {
  std::optional<ContextBinner> binner;  // default: per-dimension sign bins
  std::size_t max_pairs = 200000;       // reservoir-sampled cap
  std::uint64_t seed = 0;
};

// All record pairs sharing (action, phi cluster, context cell).
PairDataset build_pairwise_dataset(const LoggedDataset& ds, const TimeFeatureFn& phi,
                                   const PairConfig& cfg = {});

struct TwoStageConfig {
  // residual-stage time feature; defaults to day_of_week over phi's domain
  std::optional<TimeFeatureFn> phi_residual;
  bool phi_action_interaction = false;  // onehot(phi_res x a) in the residual model
  bool cell_interactions = false;       // cell x phi_res (x a) blocks; needs dense binner
  PairConfig pairs;
  double ridge_h = 1e-3;
  double ridge_g = 1.0;
};

// Stage 1 fits the residual model on pairwise reward differences within
// (action, phi cluster, cell) buckets; stage 2 fits the cluster-level model
// on residual-corrected targets. Predictions beyond the fitted horizon drop
// the residual term, which is unidentified there.
RewardModel fit_two_stage(const LoggedDataset& ds, const TimeFeatureFn& phi,
                          const TwoStageConfig& cfg = {});

}  // namespace opfv
