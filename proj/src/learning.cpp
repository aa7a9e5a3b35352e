#include "opfv/learning.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "opfv/rng.hpp"

namespace opfv {

Eigen::VectorXd ips_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pi.param_count());
  Eigen::VectorXd alpha(pi.n_actions());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd p = pi.probs(rec.context);
    alpha.setZero();
    alpha[rec.action] = p[rec.action] / rec.propensity * rec.reward;
    pi.add_weighted_score(rec.context, alpha, grad);
  }
  return grad / static_cast<double>(ds.size());
}

double ips_objective(const LoggedDataset& ds, const SoftmaxPolicy& pi) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    sum += pi.probs(rec.context)[rec.action] / rec.propensity * rec.reward;
  }
  return sum / static_cast<double>(ds.size());
}

Eigen::VectorXd dr_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi, const RewardModel& model) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pi.param_count());
  Eigen::VectorXd alpha(pi.n_actions());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd p = pi.probs(rec.context);
    for (int a = 0; a < pi.n_actions(); ++a) alpha[a] = p[a] * model.predict(rec.context, rec.t, a);
    alpha[rec.action] += p[rec.action] / rec.propensity *
                         (rec.reward - model.predict(rec.context, rec.t, rec.action));
    pi.add_weighted_score(rec.context, alpha, grad);
  }
  return grad / static_cast<double>(ds.size());
}

double dr_objective(const LoggedDataset& ds, const SoftmaxPolicy& pi, const RewardModel& model) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd p = pi.probs(rec.context);
    sum += p[rec.action] / rec.propensity *
           (rec.reward - model.predict(rec.context, rec.t, rec.action));
    for (int a = 0; a < pi.n_actions(); ++a) sum += p[a] * model.predict(rec.context, rec.t, a);
  }
  return sum / static_cast<double>(ds.size());
}

Eigen::VectorXd opfv_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi, Timestamp t_prime,
                        const TimeFeatureFn& phi, const RewardModel& model,
                        const TimeDistribution& pt) {
  const double p_phi = marginal_prob(phi, t_prime, pt);
  if (!(p_phi > 0.0))
    throw SupportViolation("common time feature support violated: p(phi(t')) = 0 for feature '" +
                           phi.id() + "'");
  const int target = phi.feature_of(t_prime);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pi.param_count());
  Eigen::VectorXd alpha(pi.n_actions());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd p = pi.probs(rec.context);
    for (int a = 0; a < pi.n_actions(); ++a)
      alpha[a] = p[a] * model.predict(rec.context, t_prime, a);
    if (phi.feature_of(rec.t) == target) {
      alpha[rec.action] += p[rec.action] / rec.propensity / p_phi *
                           (rec.reward - model.predict(rec.context, rec.t, rec.action));
    }
    pi.add_weighted_score(rec.context, alpha, grad);
  }
  return grad / static_cast<double>(ds.size());
}

double opfv_pg_objective(const LoggedDataset& ds, const SoftmaxPolicy& pi, Timestamp t_prime,
                         const TimeFeatureFn& phi, const RewardModel& model,
                         const TimeDistribution& pt) {
  const double p_phi = marginal_prob(phi, t_prime, pt);
  if (!(p_phi > 0.0)) throw SupportViolation("p(phi(t')) = 0");
  const int target = phi.feature_of(t_prime);
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd p = pi.probs(rec.context);
    if (phi.feature_of(rec.t) == target) {
      sum += p[rec.action] / rec.propensity / p_phi *
             (rec.reward - model.predict(rec.context, rec.t, rec.action));
    }
    for (int a = 0; a < pi.n_actions(); ++a) sum += p[a] * model.predict(rec.context, t_prime, a);
  }
  return sum / static_cast<double>(ds.size());
}

Eigen::VectorXd prognosticator_pg(const LoggedDataset& ds, const SoftmaxPolicy& pi, int periods,
                                  int delta, int d_prime) {
  const Eigen::VectorXd c = prognosticator_weights(periods, delta, d_prime);
  const auto slices = period_slices(ds, periods);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pi.param_count());
  Eigen::VectorXd alpha(pi.n_actions());
  for (int k = 0; k < periods; ++k) {
    if (slices[k].empty())
      throw std::runtime_error("prognosticator_pg: period " + std::to_string(k + 1) + " of " +
                               std::to_string(periods) + " contains no records");
    Eigen::VectorXd slice_grad = Eigen::VectorXd::Zero(pi.param_count());
    for (std::size_t i : slices[k]) {
      const auto& rec = ds[i];
      const Eigen::VectorXd p = pi.probs(rec.context);
      alpha.setZero();
      alpha[rec.action] = p[rec.action] / rec.propensity * rec.reward;
      pi.add_weighted_score(rec.context, alpha, slice_grad);
    }
    grad += c[k] / static_cast<double>(slices[k].size()) * slice_grad;
  }
  return grad;
}

Eigen::VectorXd iml_gradient(const LoggedDataset& ds, const SoftmaxPolicy& pi) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pi.param_count());
  Eigen::VectorXd alpha(pi.n_actions());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    alpha.setZero();
    alpha[rec.action] = -1.0;
    pi.add_weighted_score(rec.context, alpha, grad);
  }
  return grad / static_cast<double>(ds.size());
}

double iml_value(const LoggedDataset& ds, const SoftmaxPolicy& pi) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    sum += std::log(pi.probs(rec.context)[rec.action] / rec.propensity);
  }
  return -sum / static_cast<double>(ds.size());
}

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (pessimism_rho < 0.0) throw std::invalid_argument("pessimism weight must be >= 0");
  if (!gradient) throw std::invalid_argument("train requires a gradient estimator");
}

TrainResult train(const LoggedDataset& ds, SoftmaxPolicy initial, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult out{std::move(initial), {}};
  for (int it = 0; it < cfg.iterations; ++it) {
    const LoggedDataset* batch = &ds;
    std::optional<LoggedDataset> holder;
    if (cfg.minibatch > 0 && static_cast<std::size_t>(cfg.minibatch) < ds.size()) {
      Rng rng(cfg.seed, "minibatch", static_cast<std::uint64_t>(it));
      std::vector<LoggedRecord> recs(cfg.minibatch);
      for (int b = 0; b < cfg.minibatch; ++b)
        recs[b] = ds[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(ds.size()) - 1))];
      holder.emplace(std::move(recs), ds.horizon(), ds.n_actions(), ds.context_dim());
      batch = &*holder;
    }
    Eigen::VectorXd grad = cfg.gradient(*batch, out.policy);
    if (cfg.pessimism_rho > 0.0) grad += cfg.pessimism_rho * iml_gradient(*batch, out.policy);
    if (!grad.allFinite())
      throw std::runtime_error("train: non-finite gradient at iteration " + std::to_string(it) +
                               " (|params| = " + std::to_string(out.policy.params().norm()) + ")");
    out.log.grad_norm.push_back(grad.norm());
    out.policy.set_params(out.policy.params() + cfg.learning_rate * grad);
    if (cfg.probe) out.log.probe_value.push_back(cfg.probe(out.policy));
  }
  return out;
}

}  // namespace opfv
