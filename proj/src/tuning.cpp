#include "opfv/tuning.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "opfv/rng.hpp"

namespace opfv {

CandidateSet::CandidateSet(std::vector<TimeFeatureFn> candidates, std::size_t finest_index,
                           std::uint64_t validation_seed)
    : candidates_(std::move(candidates)), finest_(finest_index) {
  if (candidates_.empty()) throw std::invalid_argument("candidate set must be non-empty");
  if (finest_ >= candidates_.size()) throw std::invalid_argument("finest index out of range");

  // sampled-pair refinement check: matching under the finest candidate must
  // imply matching under every other candidate
  const auto& fine = candidates_[finest_];
  Rng rng(validation_seed, "refinement-check");
  for (int trial = 0; trial < 2000; ++trial) {
    const Timestamp t1 = rng.uniform_int(0, fine.domain_end());
    const Timestamp t2 = rng.uniform_int(0, fine.domain_end());
    if (fine.feature_of(t1) != fine.feature_of(t2)) continue;
    for (const auto& phi : candidates_) {
      if (phi.feature_of(t1) != phi.feature_of(t2))
        throw std::invalid_argument("candidate '" + phi.id() + "' is not refined by finest '" +
                                    fine.id() + "'");
    }
  }
}

double estimate_bias(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                     const TimeFeatureFn& phi, const TimeFeatureFn& phi_inf,
                     const RewardModel& model, const TimeDistribution& pt) {
  return opfv(ds, pi_e, t_prime, phi, model, pt).value -
         opfv(ds, pi_e, t_prime, phi_inf, model, pt).value;
}

double estimate_variance(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                         const TimeFeatureFn& phi, const RewardModel& model,
                         const TimeDistribution& pt) {
  if (ds.size() < 2) throw std::invalid_argument("variance estimate requires n >= 2");
  const auto res = opfv(ds, pi_e, t_prime, phi, model, pt);
  const double n = static_cast<double>(res.per_sample_terms.size());
  double ss = 0.0;
  for (double z : res.per_sample_terms) {
    const double d = z - res.value;
    ss += d * d;
  }
  return ss / ((n - 1.0) * n);
}

TuneResult tune_phi(const LoggedDataset& ds, const Policy& pi_e, Timestamp t_prime,
                    const CandidateSet& candidates, const RewardModel& model,
                    const TimeDistribution& pt) {
  const auto& phis = candidates.candidates();

  std::vector<bool> supported(phis.size());
  for (std::size_t c = 0; c < phis.size(); ++c)
    supported[c] = marginal_prob(phis[c], t_prime, pt) > 0.0;

  // bias anchor: the configured finest candidate, or the finest supported one
  // when the common-time-feature-support filter removes it
  std::size_t anchor = phis.size();
  if (supported[candidates.finest_index()]) {
    anchor = candidates.finest_index();
  } else {
    for (std::size_t c = 0; c < phis.size(); ++c)
      if (supported[c] &&
          (anchor == phis.size() || phis[c].cardinality() > phis[anchor].cardinality()))
        anchor = c;
  }
  if (anchor == phis.size())
    throw SupportViolation("tune_phi: every candidate violates common time feature support");
  const auto inf_result = opfv(ds, pi_e, t_prime, phis[anchor], model, pt);

  TuneResult out;
  out.table.resize(phis.size());
  bool have_best = false;
  double best_score = std::numeric_limits<double>::infinity();
  int best_card = 0;

  for (std::size_t c = 0; c < phis.size(); ++c) {
    auto& row = out.table[c];
    row.phi_id = phis[c].id();
    row.cardinality = phis[c].cardinality();
    if (!supported[c]) {
      row.supported = false;
      continue;
    }
    const auto res = opfv(ds, pi_e, t_prime, phis[c], model, pt);
    row.bias_hat = res.value - inf_result.value;
    const double n = static_cast<double>(res.per_sample_terms.size());
    double ss = 0.0;
    for (double z : res.per_sample_terms) {
      const double d = z - res.value;
      ss += d * d;
    }
    row.var_hat = ss / ((n - 1.0) * n);
    row.score = row.bias_hat * row.bias_hat + row.var_hat;
    const bool better = !have_best || row.score < best_score ||
                        (row.score == best_score && row.cardinality < best_card);
    if (better) {
      have_best = true;
      best_score = row.score;
      best_card = row.cardinality;
      out.selected_index = c;
    }
  }
  if (!have_best)
    throw SupportViolation("tune_phi: every candidate violates common time feature support");
  out.table[out.selected_index].selected = true;
  return out;
}

}  // namespace opfv
