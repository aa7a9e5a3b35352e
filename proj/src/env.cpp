#include "opfv/env.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace opfv {

namespace {

// inclusive 1-based index range, clamped to the context dimension
double range_sum(const Eigen::VectorXd& x, int lo, int hi) {
  double s = 0.0;
  const int top = std::min<int>(hi, static_cast<int>(x.size()));
  for (int d = lo; d <= top; ++d) s += x[d - 1];
  return s;
}

Eigen::Vector4d s_g1(const Eigen::VectorXd& x) {
  return {range_sum(x, 1, 4) < 1.5 ? 1.0 : 0.0, range_sum(x, 6, 9) < -0.5 ? 1.0 : 0.0,
          range_sum(x, 4, 5) > 3.0 ? 1.0 : 0.0, range_sum(x, 7, 10) > 3.0 ? 1.0 : 0.0};
}

Eigen::Vector3d s_g2(const Eigen::VectorXd& x) {
  return {range_sum(x, 1, 4) < 4.0 ? 1.0 : 0.0, range_sum(x, 6, 9) > 3.0 ? 1.0 : 0.0,
          range_sum(x, 3, 10) < -2.5 ? 1.0 : 0.0};
}

Eigen::Vector3d s_h1(const Eigen::VectorXd& x) {
  return {range_sum(x, 1, 6) < 2.5 ? 1.0 : 0.0, range_sum(x, 8, 9) < -0.5 ? 1.0 : 0.0,
          range_sum(x, 3, 5) > 2.0 ? 1.0 : 0.0};
}

Eigen::Vector4d s_h2(const Eigen::VectorXd& x) {
  return {range_sum(x, 1, 4) < 3.0 ? 1.0 : 0.0, range_sum(x, 3, 9) > 2.5 ? 1.0 : 0.0,
          range_sum(x, 2, 7) < 1.5 ? 1.0 : 0.0, range_sum(x, 7, 10) > -1.5 ? 1.0 : 0.0};
}

Eigen::Vector4d s_h3(const Eigen::VectorXd& x) {
  return {range_sum(x, 1, 4) < 4.0 ? 1.0 : 0.0, range_sum(x, 3, 9) > 3.5 ? 1.0 : 0.0,
          range_sum(x, 3, 5) > 1.5 ? 1.0 : 0.0, range_sum(x, 6, 10) < 2.5 ? 1.0 : 0.0};
}

Eigen::MatrixXd draw_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

Eigen::VectorXd draw_uniform(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

}  // namespace

void EnvConfig::validate() const {
  if (context_dim < 1 || n_actions < 1 || true_seasons < 1)
    throw std::invalid_argument("env dimensions must be positive");
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
  if (!std::isfinite(beta)) throw std::invalid_argument("beta must be finite");
}

struct SyntheticEnv::Data {
  EnvConfig cfg;
  Timestamp horizon;      // T
  Timestamp drift_end;    // normalization point of the drift clock
  TimeFeatureFn phi_true;
  TimeFeatureFn phi_f;
  TimeFeatureFn phi_x;

  // time feature effect (uniform(-3,3))
  Eigen::Vector4d nu_x;
  Eigen::VectorXd nu_phi;       // K
  Eigen::MatrixXd m_phi_a;      // K x A
  Eigen::MatrixXd m_x_phi_a;    // 3 x (K*A)
  // residual effect (uniform(-1,1))
  Eigen::Vector3d xi_x;
  Eigen::VectorXd xi_phif;      // 7
  Eigen::VectorXd xi_a;         // A
  Eigen::MatrixXd m_phif_a;     // 7 x A
  Eigen::MatrixXd m_x_a;        // 4 x A
  Eigen::MatrixXd m_x_phif_a;   // 4 x (7*A)
  // context drift (extended setting)
  Eigen::VectorXd gamma;        // K
  double kappa = 0.0;
};

SyntheticEnv::SyntheticEnv(EnvConfig cfg) {
  cfg.validate();
  auto d = std::make_shared<Data>();
  if (cfg.domain_end == 0) cfg.domain_end = cal::year_start(3);
  d->cfg = cfg;
  d->horizon = cal::year_start(2);
  d->drift_end = cal::year_start(3);
  d->phi_true = features::n_equal_seasons(cfg.true_seasons, cfg.domain_end);
  d->phi_f = features::day_of_week(cfg.domain_end);
  d->phi_x = d->phi_true;

  const int k = cfg.true_seasons;
  const int a = cfg.n_actions;
  Rng rng(cfg.seed, "env-coef");
  d->nu_x = draw_uniform(rng, 4, -3.0, 3.0);
  d->nu_phi = draw_uniform(rng, k, -3.0, 3.0);
  d->m_phi_a = draw_uniform(rng, k, a, -3.0, 3.0);
  d->m_x_phi_a = draw_uniform(rng, 3, k * a, -3.0, 3.0);
  d->xi_x = draw_uniform(rng, 3, -1.0, 1.0);
  d->xi_phif = draw_uniform(rng, 7, -1.0, 1.0);
  d->xi_a = draw_uniform(rng, a, -1.0, 1.0);
  d->m_phif_a = draw_uniform(rng, 7, a, -1.0, 1.0);
  d->m_x_a = draw_uniform(rng, 4, a, -1.0, 1.0);
  d->m_x_phif_a = draw_uniform(rng, 4, 7 * a, -1.0, 1.0);
  d->gamma = draw_uniform(rng, k, -3.0, 3.0);
  d->kappa = rng.uniform(-1.0, 1.0);
  d_ = std::move(d);
}

const EnvConfig& SyntheticEnv::config() const { return d_->cfg; }
Timestamp SyntheticEnv::horizon() const { return d_->horizon; }
const TimeFeatureFn& SyntheticEnv::phi_true() const { return d_->phi_true; }
const TimeFeatureFn& SyntheticEnv::phi_f() const { return d_->phi_f; }
const TimeFeatureFn& SyntheticEnv::phi_x() const { return d_->phi_x; }

SyntheticEnv::TimeCtx SyntheticEnv::time_context(Timestamp t) const {
  return {t, d_->phi_true.feature_of(t), d_->phi_f.feature_of(t),
          static_cast<double>(t) / static_cast<double>(d_->drift_end)};
}

double SyntheticEnv::g(const Eigen::VectorXd& x, Timestamp t, int action) const {
  const auto& d = *d_;
  const int season = d.phi_true.feature_of(t);
  double v = d.nu_x.dot(s_g1(x)) + d.nu_phi[season] + d.m_phi_a(season, action);
  v += s_g2(x).dot(d.m_x_phi_a.col(season * d.cfg.n_actions + action));
  return v;
}

double SyntheticEnv::h(const Eigen::VectorXd& x, Timestamp t, int action) const {
  const auto& d = *d_;
  const int dow = d.phi_f.feature_of(t);
  double v = d.xi_x.dot(s_h1(x)) + d.xi_phif[dow] + d.xi_a[action] + d.m_phif_a(dow, action);
  v += s_h2(x).dot(d.m_x_a.col(action));
  v += s_h3(x).dot(d.m_x_phif_a.col(dow * d.cfg.n_actions + action));
  return v;
}

Eigen::VectorXd SyntheticEnv::expected_rewards(const Eigen::VectorXd& x, const TimeCtx& tc) const {
  const auto& d = *d_;
  const int na = d.cfg.n_actions;
  const double lambda = d.cfg.lambda;
  const Eigen::Vector3d sg2 = s_g2(x);
  const Eigen::Vector4d sh2 = s_h2(x);
  const Eigen::Vector4d sh3 = s_h3(x);
  const double g_base = d.nu_x.dot(s_g1(x)) + d.nu_phi[tc.season];
  const double h_base = d.xi_x.dot(s_h1(x)) + d.xi_phif[tc.dow];

  Eigen::VectorXd q(na);
  for (int action = 0; action < na; ++action) {
    const double gv = g_base + d.m_phi_a(tc.season, action) +
                      sg2.dot(d.m_x_phi_a.col(tc.season * na + action));
    const double hv = h_base + d.xi_a[action] + d.m_phif_a(tc.dow, action) +
                      sh2.dot(d.m_x_a.col(action)) +
                      sh3.dot(d.m_x_phif_a.col(tc.dow * na + action));
    q[action] = lambda * gv + (1.0 - lambda) * hv;
  }
  return q;
}

Eigen::VectorXd SyntheticEnv::expected_rewards(const Eigen::VectorXd& x, Timestamp t) const {
  return expected_rewards(x, time_context(t));
}

double SyntheticEnv::expected_reward(const Eigen::VectorXd& x, Timestamp t, int action) const {
  const auto& d = *d_;
  return d.cfg.lambda * g(x, t, action) + (1.0 - d.cfg.lambda) * h(x, t, action);
}

Eigen::VectorXd SyntheticEnv::logging_probs(const Eigen::VectorXd& x, Timestamp t) const {
  return softmax(d_->cfg.beta * expected_rewards(x, t));
}

Eigen::VectorXd SyntheticEnv::evaluation_probs(const Eigen::VectorXd& x, Timestamp t,
                                               double epsilon) const {
  const Eigen::VectorXd q = expected_rewards(x, t);
  Eigen::Index best = 0;
  q.maxCoeff(&best);  // ties resolve to the lowest index
  Eigen::VectorXd p = Eigen::VectorXd::Constant(q.size(), epsilon / static_cast<double>(q.size()));
  p[best] += 1.0 - epsilon;
  return p;
}

Eigen::VectorXd SyntheticEnv::sample_context(Timestamp t, Rng& rng) const {
  const auto& d = *d_;
  Eigen::VectorXd x(d.cfg.context_dim);
  if (d.cfg.alpha == 1.0) {
    for (int i = 0; i < d.cfg.context_dim; ++i) x[i] = rng.normal();
    return x;
  }
  double mean;
  if (rng.uniform() < d.cfg.alpha) {
    mean = d.gamma[d.phi_x.feature_of(t)];
  } else {
    mean = d.kappa * (static_cast<double>(t) / static_cast<double>(d.drift_end));
  }
  for (int i = 0; i < d.cfg.context_dim; ++i) x[i] = rng.normal(mean, 1.0);
  return x;
}

LoggedDataset SyntheticEnv::sample_logged_data(std::size_t n, std::uint64_t data_seed) const {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  const auto& d = *d_;
  std::vector<LoggedRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(data_seed, "record", i);
    LoggedRecord rec;
    rec.t = rng.uniform_int(0, d.horizon - 1);
    rec.context = sample_context(rec.t, rng);
    const Eigen::VectorXd q = expected_rewards(rec.context, rec.t);
    const Eigen::VectorXd p = softmax(d.cfg.beta * q);
    rec.action = rng.categorical({p.data(), static_cast<std::size_t>(p.size())});
    rec.reward = rng.normal(q[rec.action], d.cfg.sigma);
    rec.propensity = p[rec.action];
    records[i] = std::move(rec);
  }
  return LoggedDataset(std::move(records), d.horizon, d.cfg.n_actions, d.cfg.context_dim);
}

SyntheticEnv::ValueEstimate SyntheticEnv::true_policy_value(const Policy& pi, Timestamp t_prime,
                                                            std::size_t n_mc,
                                                            std::uint64_t mc_seed) const {
  if (n_mc < 1) throw std::invalid_argument("n_mc must be >= 1");
  const TimeCtx tc = time_context(t_prime);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    Rng rng(mc_seed, "mc", i);
    const Eigen::VectorXd x = sample_context(t_prime, rng);
    const double v = pi.probs(x, t_prime).dot(expected_rewards(x, tc));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(n_mc);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n_mc) - mean * mean);
  return {mean, std::sqrt(var / static_cast<double>(n_mc)), n_mc};
}

namespace {

class EnvLoggingPolicy final : public Policy {
 public:
  explicit EnvLoggingPolicy(SyntheticEnv env) : env_(std::move(env)) {}
  Eigen::VectorXd probs(const Eigen::VectorXd& x, Timestamp t) const override {
    return env_.logging_probs(x, t);
  }

 private:
  SyntheticEnv env_;
};

class EnvEpsGreedyPolicy final : public Policy {
 public:
  EnvEpsGreedyPolicy(SyntheticEnv env, double epsilon) : env_(std::move(env)), epsilon_(epsilon) {}
  Eigen::VectorXd probs(const Eigen::VectorXd& x, Timestamp t) const override {
    return env_.evaluation_probs(x, t, epsilon_);
  }

 private:
  SyntheticEnv env_;
  double epsilon_;
};

}  // namespace

std::shared_ptr<Policy> SyntheticEnv::logging_policy() const {
  return std::make_shared<EnvLoggingPolicy>(*this);
}

std::shared_ptr<Policy> SyntheticEnv::evaluation_policy(double epsilon) const {
  return std::make_shared<EnvEpsGreedyPolicy>(*this, epsilon);
}

std::shared_ptr<Policy> SyntheticEnv::evaluation_policy() const {
  return evaluation_policy(d_->cfg.epsilon);
}

std::string SyntheticEnv::to_json_string() const {
  const auto& c = d_->cfg;
  nlohmann::json j;
  j["context_dim"] = c.context_dim;
  j["n_actions"] = c.n_actions;
  j["lambda"] = c.lambda;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["epsilon"] = c.epsilon;
  j["sigma"] = c.sigma;
  j["true_seasons"] = c.true_seasons;
  j["seed"] = c.seed;
  j["domain_end"] = c.domain_end;
  return j.dump();
}

SyntheticEnv SyntheticEnv::from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  EnvConfig c;
  c.context_dim = j.value("context_dim", c.context_dim);
  c.n_actions = j.value("n_actions", c.n_actions);
  c.lambda = j.value("lambda", c.lambda);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.sigma = j.value("sigma", c.sigma);
  c.true_seasons = j.value("true_seasons", c.true_seasons);
  c.seed = j.value("seed", c.seed);
  c.domain_end = j.value("domain_end", c.domain_end);
  return SyntheticEnv(c);
}

}  // namespace opfv
