#include "opfv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "opfv/linalg.hpp"

namespace opfv {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double t : v) s += t;
  return s / static_cast<double>(v.size());
}

void track_weight(EstimateDiagnostics& diag, double w, bool first) {
  if (first) {
    diag.min_weight = diag.max_weight = w;
  } else {
    diag.min_weight = std::min(diag.min_weight, w);
    diag.max_weight = std::max(diag.max_weight, w);
  }
}

}  // namespace

EstimateResult ips(const LoggedDataset& ds, const Policy& pi_e) {
  EstimateResult res;
  res.per_sample_terms.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const double w = pi_e.prob(rec.context, rec.t, rec.action) / rec.propensity;
    track_weight(res.diagnostics, w, i == 0);
    res.per_sample_terms[i] = w * rec.reward;
  }
  res.value = mean_of(res.per_sample_terms);
  return res;
}

EstimateResult dr_naive(const LoggedDataset& ds, const Policy& pi_e, const RewardModel& model) {
  EstimateResult res;
  res.per_sample_terms.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd pe = pi_e.probs(rec.context, rec.t);
    const double w = pe[rec.action] / rec.propensity;
    track_weight(res.diagnostics, w, i == 0);
    double model_term = 0.0;
    for (int a = 0; a < ds.n_actions(); ++a)
      model_term += pe[a] * model.predict(rec.context, rec.t, a);
    res.per_sample_terms[i] = w * (rec.reward - model.predict(rec.context, rec.t, rec.action)) +
                              model_term;
  }
  res.value = mean_of(res.per_sample_terms);
  return res;
}

EstimateResult opfv(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                    const TimeFeatureFn& phi, const RewardModel& model,
                    const TimeDistribution& pt) {
  const double p_phi = marginal_prob(phi, t_prime, pt);
  if (!(p_phi > 0.0))
    throw SupportViolation("common time feature support violated: p(phi(t')) = 0 for feature '" +
                           phi.id() + "'");
  const int target = phi.feature_of(t_prime);

  EstimateResult res;
  res.diagnostics.p_phi = p_phi;
  res.per_sample_terms.resize(ds.size());
  std::size_t matched = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd pe = pi_e.probs(rec.context, t_prime);
    const bool ind = phi.feature_of(rec.t) == target;
    matched += ind;
    const double w = (ind ? 1.0 / p_phi : 0.0) * pe[rec.action] / rec.propensity;
    track_weight(res.diagnostics, w, i == 0);
    double model_term = 0.0;
    for (int a = 0; a < ds.n_actions(); ++a)
      model_term += pe[a] * model.predict(rec.context, t_prime, a);
    res.per_sample_terms[i] =
        w * (rec.reward - model.predict(rec.context, rec.t, rec.action)) + model_term;
  }
  res.diagnostics.indicator_fraction =
      static_cast<double>(matched) / static_cast<double>(ds.size());
  res.value = mean_of(res.per_sample_terms);
  return res;
}

EstimateResult opfv_extended(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                             const TimeFeatureFn& phi_x, const TimeFeatureFn& phi_r,
                             const RewardModel& model, const TimeDistribution& pt) {
  const TimeFeatureFn phi_xr = product_feature(phi_x, phi_r);
  const double p_xr = marginal_prob(phi_xr, t_prime, pt);
  const double p_x = marginal_prob(phi_x, t_prime, pt);
  if (!(p_xr > 0.0) || !(p_x > 0.0))
    throw SupportViolation("common time feature support violated for the extended estimator");
  const int target_xr = phi_xr.feature_of(t_prime);
  const int target_x = phi_x.feature_of(t_prime);

  EstimateResult res;
  res.diagnostics.p_phi = p_xr;
  res.per_sample_terms.resize(ds.size());
  std::size_t matched = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd pe = pi_e.probs(rec.context, t_prime);
    const bool ind_xr = phi_xr.feature_of(rec.t) == target_xr;
    const bool ind_x = phi_x.feature_of(rec.t) == target_x;
    matched += ind_xr;
    const double w = (ind_xr ? 1.0 / p_xr : 0.0) * pe[rec.action] / rec.propensity;
    track_weight(res.diagnostics, w, i == 0);
    double model_term = 0.0;
    if (ind_x) {
      for (int a = 0; a < ds.n_actions(); ++a)
        model_term += pe[a] * model.predict(rec.context, t_prime, a);
      model_term /= p_x;
    }
    res.per_sample_terms[i] =
        w * (rec.reward - model.predict(rec.context, rec.t, rec.action)) + model_term;
  }
  res.diagnostics.indicator_fraction =
      static_cast<double>(matched) / static_cast<double>(ds.size());
  res.value = mean_of(res.per_sample_terms);
  return res;
}

Eigen::VectorXd fourier_basis(int k, int periods_plus_delta, int d_prime) {
  Eigen::VectorXd psi(2 * d_prime + 1);
  const double base = 2.0 * std::numbers::pi * static_cast<double>(k) /
                      static_cast<double>(periods_plus_delta);
  for (int j = 1; j <= d_prime; ++j) psi[j - 1] = std::sin(j * base);
  psi[d_prime] = 1.0;
  for (int j = 1; j <= d_prime; ++j) psi[d_prime + j] = std::cos(j * base);
  return psi;
}

Eigen::VectorXd prognosticator_weights(int periods, int delta, int d_prime) {
  const int kpd = periods + delta;
  Eigen::MatrixXd psi(periods, 2 * d_prime + 1);
  for (int k = 1; k <= periods; ++k) psi.row(k - 1) = fourier_basis(k, kpd, d_prime);
  const Eigen::VectorXd v =
      linalg::pinv_solve(psi.transpose() * psi, fourier_basis(kpd, kpd, d_prime));
  return psi * v;
}

std::vector<std::vector<std::size_t>> period_slices(const LoggedDataset& ds, int periods) {
  std::vector<std::vector<std::size_t>> slices(periods);
  const auto horizon = static_cast<double>(ds.horizon());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int k = std::min<int>(
        periods - 1, static_cast<int>(static_cast<double>(ds[i].t) / horizon * periods));
    slices[k].push_back(i);
  }
  return slices;
}

namespace {

double inner_value(const LoggedDataset& ds, const std::vector<std::size_t>& idx,
                   const Policy& pi_e, InnerEstimator inner, const RewardModel* model) {
  double sum = 0.0;
  for (std::size_t i : idx) {
    const auto& rec = ds[i];
    if (inner == InnerEstimator::kIps) {
      sum += pi_e.prob(rec.context, rec.t, rec.action) / rec.propensity * rec.reward;
    } else {
      const Eigen::VectorXd pe = pi_e.probs(rec.context, rec.t);
      const double w = pe[rec.action] / rec.propensity;
      double model_term = 0.0;
      for (int a = 0; a < ds.n_actions(); ++a)
        model_term += pe[a] * model->predict(rec.context, rec.t, a);
      sum += w * (rec.reward - model->predict(rec.context, rec.t, rec.action)) + model_term;
    }
  }
  return sum / static_cast<double>(idx.size());
}

Eigen::VectorXd period_values(const LoggedDataset& ds, const Policy& pi_e, int periods,
                              InnerEstimator inner, const RewardModel* model) {
  if (inner == InnerEstimator::kDr && model == nullptr)
    throw std::invalid_argument("the DR inner estimator requires a reward model");
  const auto slices = period_slices(ds, periods);
  Eigen::VectorXd y(periods);
  for (int k = 0; k < periods; ++k) {
    if (slices[k].empty())
      throw std::runtime_error("prognosticator: period " + std::to_string(k + 1) + " of " +
                               std::to_string(periods) + " contains no records");
    y[k] = inner_value(ds, slices[k], pi_e, inner, model);
  }
  return y;
}

}  // namespace

EstimateResult prognosticator(const LoggedDataset& ds, const Policy& pi_e,
                              const PrognosticatorConfig& cfg) {
  if (cfg.periods < 1) throw std::invalid_argument("prognosticator requires periods >= 1");
  const Eigen::VectorXd y = period_values(ds, pi_e, cfg.periods, cfg.inner, cfg.model);
  const Eigen::VectorXd c = prognosticator_weights(cfg.periods, cfg.delta, cfg.d_prime);
  EstimateResult res;
  res.value = c.dot(y);
  return res;
}

EstimateResult prognosticator_phi(const LoggedDataset& ds, const Policy& pi_e,
                                  const std::vector<int>& phi_p, int periods, int delta,
                                  InnerEstimator inner, const RewardModel* model) {
  if (static_cast<int>(phi_p.size()) < periods + delta)
    throw std::invalid_argument("phi_p must cover periods 1..K+delta");
  const int target = phi_p[periods + delta - 1];
  bool observed = false;
  for (int k = 0; k < periods; ++k) observed |= phi_p[k] == target;
  if (!observed)
    throw SupportViolation("prognosticator_phi: feature of the forecast period was never "
                           "observed among the fitted periods");

  const Eigen::VectorXd y = period_values(ds, pi_e, periods, inner, model);
  const int card = *std::max_element(phi_p.begin(), phi_p.begin() + periods + delta) + 1;
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(periods, card);
  for (int k = 0; k < periods; ++k) design(k, phi_p[k]) = 1.0;
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(card);
  onehot[target] = 1.0;
  const Eigen::VectorXd v = linalg::pinv_solve(design.transpose() * design, onehot);
  EstimateResult res;
  res.value = (design * v).dot(y);
  return res;
}

double dm(const LoggedDataset& ds, const Policy& pi, const RewardModel& model) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd p = pi.probs(rec.context, rec.t);
    for (int a = 0; a < ds.n_actions(); ++a) sum += p[a] * model.predict(rec.context, rec.t, a);
  }
  return sum / static_cast<double>(ds.size());
}

double snips(const LoggedDataset& ds, const Policy& pi) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const double w = pi.prob(rec.context, rec.t, rec.action) / rec.propensity;
    num += w * rec.reward;
    den += w;
  }
  if (!(den > 0.0)) throw std::runtime_error("snips: importance weights sum to zero");
  return num / den;
}

double sndr(const LoggedDataset& ds, const Policy& pi, const RewardModel& model) {
  double dm_term = 0.0, num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = ds[i];
    const Eigen::VectorXd p = pi.probs(rec.context, rec.t);
    for (int a = 0; a < ds.n_actions(); ++a)
      dm_term += p[a] * model.predict(rec.context, rec.t, a);
    const double w = p[rec.action] / rec.propensity;
    num += w * (rec.reward - model.predict(rec.context, rec.t, rec.action));
    den += w;
  }
  if (!(den > 0.0)) throw std::runtime_error("sndr: importance weights sum to zero");
  return dm_term / static_cast<double>(ds.size()) + num / den;
}

}  // namespace opfv
