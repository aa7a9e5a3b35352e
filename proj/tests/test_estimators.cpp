#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "opfv/env.hpp"
#include "opfv/estimators.hpp"
#include "opfv/linalg.hpp"
#include "toy_world.hpp"

using namespace opfv;

namespace {

constexpr Timestamp kDay = cal::kSecondsPerDay;
const Timestamp kHorizon = cal::year_start(2);
const Timestamp kDomainEnd = cal::year_start(3);

// pi(a|x,t) frozen at a reference time
class FrozenPolicy final : public Policy {
 public:
  FrozenPolicy(std::shared_ptr<const Policy> inner, Timestamp t_ref)
      : inner_(std::move(inner)), t_ref_(t_ref) {}
  Eigen::VectorXd probs(const Eigen::VectorXd& x, Timestamp) const override {
    return inner_->probs(x, t_ref_);
  }

 private:
  std::shared_ptr<const Policy> inner_;
  Timestamp t_ref_;
};

LoggedDataset stationary_sample(const SyntheticEnv& env, Timestamp t0, std::size_t n,
                                std::uint64_t seed) {
  std::vector<LoggedRecord> recs(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, "stationary", i);
    LoggedRecord rec;
    rec.t = t0;
    rec.context = env.sample_context(t0, rng);
    const Eigen::VectorXd q = env.expected_rewards(rec.context, t0);
    const Eigen::VectorXd p = env.logging_probs(rec.context, t0);
    rec.action = rng.categorical({p.data(), static_cast<std::size_t>(p.size())});
    rec.reward = rng.normal(q[rec.action], env.config().sigma);
    rec.propensity = p[rec.action];
    recs[i] = std::move(rec);
  }
  return LoggedDataset(std::move(recs), env.horizon(), env.config().n_actions,
                       env.config().context_dim);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double t : v) s += t;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double t : v) s += (t - m) * (t - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("ips unit behaviour") {
  // single record: weight 2, reward 0.5
  LoggedRecord rec;
  rec.context = Eigen::VectorXd::Zero(2);
  rec.t = 5 * kDay;
  rec.action = 0;
  rec.reward = 0.5;
  rec.propensity = 0.5;
  const LoggedDataset ds({rec}, kHorizon, 2, 2);
  const toy::TablePolicy pe({{5 * kDay, Eigen::Vector2d(1.0, 0.0)}});
  const auto res = ips(ds, pe);
  CHECK(res.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.per_sample_terms.size() == 1);
  CHECK(res.diagnostics.max_weight == doctest::Approx(2.0));
}

TEST_CASE("ips with the logging policy recovers the reward mean") {
  const SyntheticEnv env;
  const auto ds = env.sample_logged_data(400, 12);
  const auto pi0 = env.logging_policy();
  const auto res = ips(ds, *pi0);
  double reward_mean = 0.0;
  for (const auto& rec : ds.records()) reward_mean += rec.reward;
  reward_mean /= static_cast<double>(ds.size());
  CHECK(res.value == doctest::Approx(reward_mean).epsilon(1e-12));
  CHECK(res.value == doctest::Approx(mean(res.per_sample_terms)).epsilon(1e-12));
}

TEST_CASE("ips is unbiased in a stationary world") {
  EnvConfig ec;
  ec.seed = 101;
  const SyntheticEnv env(ec);
  const Timestamp t0 = 77 * kDay;  // freezing time removes non-stationarity
  const auto pi_e = env.evaluation_policy();
  const double truth = env.true_policy_value(*pi_e, t0, 200000, 31).mean;

  std::vector<double> estimates(500);
  for (std::size_t rep = 0; rep < estimates.size(); ++rep)
    estimates[rep] = ips(stationary_sample(env, t0, 100, 1000 + rep), *pi_e).value;
  const double se = std::sqrt(variance(estimates) / static_cast<double>(estimates.size()));
  CHECK(std::abs(mean(estimates) - truth) < 3.0 * se);
}

TEST_CASE("naive dr reduces to ips with a zero model and beats it with the oracle") {
  EnvConfig ec;
  ec.seed = 7;
  const SyntheticEnv env(ec);
  const auto pi_e = env.evaluation_policy();
  const auto ds = env.sample_logged_data(300, 3);

  const auto res_zero = dr_naive(ds, *pi_e, RewardModel::zero());
  const auto res_ips = ips(ds, *pi_e);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(res_zero.per_sample_terms[i] == doctest::Approx(res_ips.per_sample_terms[i]));

  // logging policy + oracle model + noiseless rewards: residuals vanish and
  // only the per-record policy average of q remains
  EnvConfig quiet = ec;
  quiet.sigma = 0.0;
  const SyntheticEnv qenv(quiet);
  const auto qds = qenv.sample_logged_data(200, 4);
  const auto pi0 = qenv.logging_policy();
  const auto oracle = RewardModel::oracle([qenv](const Eigen::VectorXd& x, Timestamp t, int a) {
    return qenv.expected_reward(x, t, a);
  });
  const auto dr_oracle = dr_naive(qds, *pi0, oracle);
  for (std::size_t i = 0; i < qds.size(); ++i) {
    const auto& rec = qds[i];
    const double expected =
        qenv.logging_probs(rec.context, rec.t).dot(qenv.expected_rewards(rec.context, rec.t));
    CHECK(dr_oracle.per_sample_terms[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  // both recover the same value up to the action-sampling noise
  CHECK(std::abs(dr_oracle.value - ips(qds, *pi0).value) < 0.5);

  // control variate: oracle-model dr has strictly lower variance (frozen time)
  const Timestamp t0 = 50 * kDay;
  const auto env_oracle = RewardModel::oracle([env](const Eigen::VectorXd& x, Timestamp t, int a) {
    return env.expected_reward(x, t, a);
  });
  std::vector<double> ips_est(500), dr_est(500);
  for (std::size_t rep = 0; rep < ips_est.size(); ++rep) {
    const auto rds = stationary_sample(env, t0, 100, 9000 + rep);
    ips_est[rep] = ips(rds, *pi_e).value;
    dr_est[rep] = dr_naive(rds, *pi_e, env_oracle).value;
  }
  CHECK(variance(dr_est) < variance(ips_est));
}

TEST_CASE("opfv single-record arithmetic") {
  LoggedRecord rec;
  rec.context = Eigen::VectorXd::Zero(2);
  rec.t = 10 * kDay;
  rec.action = 0;
  rec.reward = 1.0;
  rec.propensity = 0.5;
  const LoggedDataset ds({rec}, kHorizon, 2, 2);

  // two-cluster feature; the empirical window puts half its mass on the match
  const auto world = toy::make_toy_world(toy::ModelKind::kArbitrary);
  const TimeDistribution pt = TimeDistribution::empirical({10 * kDay, 100 * kDay});
  const toy::TablePolicy pe({{world.t_prime, Eigen::Vector2d(1.0, 0.0)}});
  const auto res = opfv::opfv(ds, pe, world.t_prime, world.phi, RewardModel::zero(), pt);
  CHECK(res.diagnostics.p_phi == doctest::Approx(0.5));
  CHECK(res.value == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("opfv raises on a time feature support violation") {
  const auto world = toy::make_toy_world(toy::ModelKind::kArbitrary);
  const auto ds = world.single_record_dataset(world.outcomes().front());
  // every sampled timestamp lies in the other cluster
  const TimeDistribution no_support = TimeDistribution::empirical({100 * kDay, 200 * kDay});
  CHECK_THROWS_AS(opfv::opfv(ds, *world.eval_policy(), world.t_prime, world.phi, RewardModel::zero(),
                       no_support),
                  SupportViolation);
}

TEST_CASE("exhaustive toy world: expectation matches the bias expression") {
  const auto world = toy::make_toy_world(toy::ModelKind::kArbitrary);
  const auto pe = world.eval_policy();
  const auto model = world.reward_model();

  double mean_est = 0.0, total_prob = 0.0;
  for (const auto& o : world.outcomes()) {
    const auto ds = world.single_record_dataset(o);
    mean_est += o.prob * opfv::opfv(ds, *pe, world.t_prime, world.phi, model, world.pt).value;
    total_prob += o.prob;
  }
  CHECK(total_prob == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(mean_est - world.true_value() - world.bias_formula()) < 1e-10);
}

TEST_CASE("exhaustive toy world: variance matches the four-term expression") {
  for (const auto kind : {toy::ModelKind::kOracle, toy::ModelKind::kPairwiseCorrectOffset}) {
    const auto world = toy::make_toy_world(kind);
    const auto pe = world.eval_policy();
    const auto model = world.reward_model();

    double m1 = 0.0, m2 = 0.0;
    for (const auto& o : world.outcomes()) {
      const auto ds = world.single_record_dataset(o);
      const double v = opfv::opfv(ds, *pe, world.t_prime, world.phi, model, world.pt).value;
      m1 += o.prob * v;
      m2 += o.prob * v * v;
    }
    const double exhaustive_var = m2 - m1 * m1;
    const auto terms = world.variance_formula_terms();
    const double formula = terms[0] + terms[1] + terms[2] + terms[3];
    CHECK(std::abs(exhaustive_var - formula) < 1e-10);
    if (kind == toy::ModelKind::kPairwiseCorrectOffset) {
      CHECK(terms[1] > 0.0);  // the offset makes the weight-variance terms active
      CHECK(terms[2] > 0.0);
    }
  }
}

TEST_CASE("reduction chain: constant feature collapses opfv to dr and ips") {
  EnvConfig ec;
  ec.seed = 5;
  const SyntheticEnv env(ec);
  const auto ds = env.sample_logged_data(200, 6);
  const Timestamp t_prime = cal::season_midpoint(2, 8, 3);
  const TimeDistribution pt = TimeDistribution::uniform(0, env.horizon());
  const auto phi_const = features::constant(kDomainEnd);
  const auto pe = env.evaluation_policy();
  const auto frozen = std::make_shared<FrozenPolicy>(pe, t_prime);

  // time-invariant model, so the model terms coincide at t_i and t'
  const auto static_model = RewardModel::oracle([](const Eigen::VectorXd& x, Timestamp, int a) {
    return 0.4 * x[0] - 0.2 * x[1] + 0.3 * a;
  });

  const auto lhs = opfv::opfv(ds, *pe, t_prime, phi_const, static_model, pt);
  const auto rhs = dr_naive(ds, *frozen, static_model);
  REQUIRE(lhs.per_sample_terms.size() == rhs.per_sample_terms.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(lhs.per_sample_terms[i] ==
          doctest::Approx(rhs.per_sample_terms[i]).epsilon(1e-12));

  const auto lhs0 = opfv::opfv(ds, *pe, t_prime, phi_const, RewardModel::zero(), pt);
  const auto rhs0 = ips(ds, *frozen);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(lhs0.per_sample_terms[i] ==
          doctest::Approx(rhs0.per_sample_terms[i]).epsilon(1e-12));
}

TEST_CASE("extended opfv reduces to opfv when the context feature is constant") {
  EnvConfig ec;
  ec.seed = 15;
  const SyntheticEnv env(ec);
  const auto ds = env.sample_logged_data(150, 16);
  const Timestamp t_prime = cal::season_midpoint(2, 8, 6);
  const TimeDistribution pt = TimeDistribution::uniform(0, env.horizon());
  const auto pe = env.evaluation_policy();
  const auto phi_const = features::constant(kDomainEnd);
  const auto phi_r = env.phi_true();
  const auto model = fit_direct(ds, env.phi_f());

  const auto ext = opfv_extended(ds, *pe, t_prime, phi_const, phi_r, model, pt);
  const auto base = opfv::opfv(ds, *pe, t_prime, phi_r, model, pt);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(ext.per_sample_terms[i] == doctest::Approx(base.per_sample_terms[i]).epsilon(1e-12));

  // with a zero model the second term vanishes and the joint feature drives it
  const auto ext0 =
      opfv_extended(ds, *pe, t_prime, env.phi_x(), phi_r, RewardModel::zero(), pt);
  const auto joint0 = opfv::opfv(ds, *pe, t_prime, product_feature(env.phi_x(), phi_r),
                           RewardModel::zero(), pt);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(ext0.per_sample_terms[i] ==
          doctest::Approx(joint0.per_sample_terms[i]).epsilon(1e-12));
}

TEST_CASE("prognosticator forecasts a constant series exactly") {
  // constant rewards under the logging policy give identical per-period values
  Rng rng(61, "prog-const");
  std::vector<LoggedRecord> recs(400);
  for (auto& rec : recs) {
    rec.context = Eigen::VectorXd::Zero(2);
    rec.t = rng.uniform_int(0, kHorizon - 1);
    rec.action = 0;
    rec.reward = 1.7;
    rec.propensity = 1.0;
  }
  const LoggedDataset ds(std::move(recs), kHorizon, 1, 2);
  const UniformPolicy pe(1);
  // constants extrapolate exactly whenever the Fourier design has full column
  // rank (2*d_prime + 1 <= K); over-parameterized designs fit the past
  // exactly but their minimum-norm forecast is no longer anchored
  for (const auto& [periods, d_prime] : std::vector<std::pair<int, int>>{{8, 3}, {16, 5}, {16, 7}}) {
    PrognosticatorConfig cfg;
    cfg.periods = periods;
    cfg.delta = 2;
    cfg.d_prime = d_prime;
    CHECK(prognosticator(ds, pe, cfg).value == doctest::Approx(1.7).epsilon(1e-9));
  }
}

TEST_CASE("prognosticator least squares satisfies residual orthogonality") {
  Rng rng(62, "prog-ols");
  const int periods = 8, delta = 3;
  for (int d_prime : {3, 5, 7}) {
    Eigen::MatrixXd psi(periods, 2 * d_prime + 1);
    for (int k = 1; k <= periods; ++k)
      psi.row(k - 1) = fourier_basis(k, periods + delta, d_prime);
    Eigen::VectorXd y(periods);
    for (int k = 0; k < periods; ++k) y[k] = rng.normal();
    const Eigen::VectorXd w = linalg::pinv_solve(psi.transpose() * psi, psi.transpose() * y);
    CHECK((psi.transpose() * (y - psi * w)).cwiseAbs().maxCoeff() < 1e-8);
    // the forecast weights reproduce the hat-row forecast
    const Eigen::VectorXd c = prognosticator_weights(periods, delta, d_prime);
    CHECK(c.dot(y) ==
          doctest::Approx(fourier_basis(periods + delta, periods + delta, d_prime).dot(w))
              .epsilon(1e-9));
  }
}

TEST_CASE("prognosticator names empty slices") {
  std::vector<LoggedRecord> recs(3);
  for (int i = 0; i < 3; ++i) {
    recs[i].context = Eigen::VectorXd::Zero(1);
    recs[i].t = i * kDay;  // everything in the first slice
    recs[i].action = 0;
    recs[i].reward = 1.0;
    recs[i].propensity = 1.0;
  }
  const LoggedDataset ds(std::move(recs), kHorizon, 1, 1);
  const UniformPolicy pe(1);
  PrognosticatorConfig cfg;
  cfg.periods = 4;
  try {
    prognosticator(ds, pe, cfg);
    FAIL("expected an empty-slice error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("period 2") != std::string::npos);
  }
}

namespace {

// one record per period whose inner ips value is exactly y[k]
LoggedDataset period_value_dataset(const Eigen::VectorXd& y) {
  const int periods = static_cast<int>(y.size());
  std::vector<LoggedRecord> recs(periods);
  for (int k = 0; k < periods; ++k) {
    recs[k].context = Eigen::VectorXd::Zero(1);
    recs[k].t = static_cast<Timestamp>((k + 0.5) / periods * kHorizon);
    recs[k].action = 0;
    recs[k].reward = y[k];
    recs[k].propensity = 1.0;
  }
  return LoggedDataset(std::move(recs), kHorizon, 1, 1);
}

}  // namespace

TEST_CASE("prognosticator-phi forecasts by group means") {
  const UniformPolicy pe(1);
  Eigen::VectorXd y(8);
  Rng rng(63, "prog-phi");
  for (int k = 0; k < 8; ++k) y[k] = rng.normal();
  const auto ds = period_value_dataset(y);

  SUBCASE("injective features forecast the matching period exactly") {
    std::vector<int> phi_p = {0, 1, 2, 3, 4, 5, 6, 7, 2};  // K+delta maps to period 3
    CHECK(prognosticator_phi(ds, pe, phi_p, 8, 1).value == doctest::Approx(y[2]).epsilon(1e-9));
  }
  SUBCASE("constant features forecast the pooled mean") {
    std::vector<int> phi_p(9, 0);
    CHECK(prognosticator_phi(ds, pe, phi_p, 8, 1).value ==
          doctest::Approx(y.mean()).epsilon(1e-9));
  }
  SUBCASE("repeated features forecast by per-group averaging") {
    std::vector<int> phi_p = {0, 1, 0, 2, 1, 0, 2, 1, 1};
    double group_sum = 0.0;
    int group_count = 0;
    for (int k = 0; k < 8; ++k)
      if (phi_p[static_cast<std::size_t>(k)] == 1) {
        group_sum += y[k];
        ++group_count;
      }
    CHECK(prognosticator_phi(ds, pe, phi_p, 8, 1).value ==
          doctest::Approx(group_sum / group_count).epsilon(1e-9));
  }
  SUBCASE("unobserved forecast features violate support") {
    std::vector<int> phi_p = {0, 1, 0, 1, 0, 1, 0, 1, 2};
    CHECK_THROWS_AS(prognosticator_phi(ds, pe, phi_p, 8, 1), SupportViolation);
  }
}

TEST_CASE("self-normalized evaluators") {
  const SyntheticEnv env;
  const auto ds = env.sample_logged_data(250, 18);
  const auto pi0 = env.logging_policy();

  double reward_mean = 0.0;
  for (const auto& rec : ds.records()) reward_mean += rec.reward;
  reward_mean /= static_cast<double>(ds.size());
  CHECK(snips(ds, *pi0) == doctest::Approx(reward_mean).epsilon(1e-12));

  // global propensity scaling cancels in the ratio
  std::vector<LoggedRecord> scaled(ds.records());
  for (auto& rec : scaled) rec.propensity *= 0.5;
  const LoggedDataset ds_scaled(std::move(scaled), ds.horizon(), ds.n_actions(),
                                ds.context_dim());
  const auto pe = env.evaluation_policy();
  CHECK(snips(ds, *pe) == doctest::Approx(snips(ds_scaled, *pe)).epsilon(1e-12));

  CHECK(sndr(ds, *pe, RewardModel::zero()) == doctest::Approx(snips(ds, *pe)).epsilon(1e-12));

  const auto model = fit_direct(ds, env.phi_f());
  const double dm_value = dm(ds, *pe, model);
  CHECK(std::isfinite(dm_value));
  CHECK(std::isfinite(sndr(ds, *pe, model)));
}

TEST_CASE("per-sample terms always average to the reported value") {
  const SyntheticEnv env;
  const auto ds = env.sample_logged_data(123, 77);
  const auto pe = env.evaluation_policy();
  const auto model = fit_direct(ds, env.phi_f());
  const TimeDistribution pt = TimeDistribution::uniform(0, env.horizon());
  const Timestamp t_prime = cal::season_midpoint(2, 8, 1);
  for (const auto& res :
       {ips(ds, *pe), dr_naive(ds, *pe, model), opfv::opfv(ds, *pe, t_prime, env.phi_true(), model, pt),
        opfv_extended(ds, *pe, t_prime, env.phi_x(), env.phi_true(), model, pt)}) {
    CHECK(res.value == doctest::Approx(mean(res.per_sample_terms)).epsilon(1e-12));
  }
}
