#include "opfv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace opfv::harness {

namespace {

constexpr const char* kVersion = "opfv 0.1.0";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_sweep(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

int resolve_workers(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("OPFV_NUM_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// deterministic task grid: results land in per-index slots
void parallel_for(std::size_t n_tasks, int workers, const std::function<void(std::size_t)>& fn) {
  workers = std::min<std::size_t>(std::max(workers, 1), n_tasks == 0 ? 1 : n_tasks);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

EnvConfig env_config_from_json(const Json& j) {
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
  return c;
}

}  // namespace

TimeFeatureFn feature_from_json(const Json& spec, Timestamp domain_end) {
  const std::string kind = spec.at("kind").get<std::string>();
  const Json params = spec.value("params", Json::object());
  if (kind == "product") {
    const auto& factors = spec.at("factors");
    if (!factors.is_array() || factors.size() < 2)
      throw std::invalid_argument("product feature requires at least two factors");
    TimeFeatureFn acc = feature_from_json(factors[0], domain_end);
    for (std::size_t i = 1; i < factors.size(); ++i)
      acc = product_feature(acc, feature_from_json(factors[i], domain_end));
    return acc;
  }
  if (kind == "constant") return features::constant(domain_end);
  if (kind == "n_equal_seasons") return features::n_equal_seasons(params.at("k").get<int>(), domain_end);
  if (kind == "month") return features::month(domain_end);
  if (kind == "week_of_month") return features::week_of_month(domain_end);
  if (kind == "date") return features::date(domain_end);
  if (kind == "day_of_week") return features::day_of_week(domain_end);
  if (kind == "hour") return features::hour(domain_end);
  if (kind == "four_per_day") return features::four_per_day(domain_end);
  if (kind == "am_pm") return features::am_pm(domain_end);
  if (kind == "weekday_weekend") return features::weekday_weekend(domain_end);
  if (kind == "holiday") {
    if (!params.contains("days"))
      throw std::invalid_argument("holiday feature requires a calendar table under params.days");
    std::vector<std::pair<int, int>> days;
    for (const auto& d : params.at("days")) days.emplace_back(d.at(0).get<int>(), d.at(1).get<int>());
    return features::holiday(std::move(days), domain_end);
  }
  throw std::invalid_argument("unknown time feature kind '" + kind + "'");
}

RewardModel reward_model_from_json(const Json& spec, const LoggedDataset& ds,
                                   const SyntheticEnv& env) {
  const std::string kind = spec.value("kind", "direct");
  if (kind == "zero") return RewardModel::zero();
  if (kind == "oracle") {
    SyntheticEnv captured = env;
    return RewardModel::oracle([captured](const Eigen::VectorXd& x, Timestamp t, int a) {
      return captured.expected_reward(x, t, a);
    });
  }
  const Timestamp domain_end = env.config().domain_end;
  if (kind == "direct") {
    DirectFitConfig cfg;
    cfg.ridge = spec.value("ridge", cfg.ridge);
    cfg.phi_action_interaction = spec.value("phi_action_interaction", true);
    const TimeFeatureFn phi_f = spec.contains("phi_f")
                                    ? feature_from_json(spec.at("phi_f"), domain_end)
                                    : features::day_of_week(domain_end);
    return fit_direct(ds, phi_f, cfg);
  }
  if (kind == "two_stage") {
    TwoStageConfig cfg;
    cfg.ridge_g = spec.value("ridge_g", cfg.ridge_g);
    cfg.ridge_h = spec.value("ridge_h", cfg.ridge_h);
    cfg.phi_action_interaction = spec.value("phi_action_interaction", false);
    cfg.cell_interactions = spec.value("cell_interactions", false);
    if (spec.contains("phi_residual"))
      cfg.phi_residual = feature_from_json(spec.at("phi_residual"), domain_end);
    const TimeFeatureFn phi = spec.contains("phi") ? feature_from_json(spec.at("phi"), domain_end)
                                                   : env.phi_true();
    return fit_two_stage(ds, phi, cfg);
  }
  throw std::invalid_argument("unknown reward model kind '" + kind + "'");
}

void apply_override(Json& config, const std::string& key, const std::string& value) {
  Json* node = &config;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw std::invalid_argument("empty override key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  Json parsed = Json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // plain strings need no quoting
  (*node)[parts.back()] = parsed;
}

Timestamp TargetSpec::resolve(std::uint64_t seed_index) const {
  switch (mode) {
    case Mode::kFixedSeconds:
      return seconds;
    case Mode::kFixedSeason: {
      const auto [lo, hi] = cal::season_interval(year, seasons_k, season);
      return lo + static_cast<Timestamp>(quantile * static_cast<double>(hi - lo));
    }
    case Mode::kRotateSeasons:
    default: {
      const int s = static_cast<int>(seed_index % static_cast<std::uint64_t>(seasons_k));
      const auto [lo, hi] = cal::season_interval(year, seasons_k, s);
      return lo + static_cast<Timestamp>(quantile * static_cast<double>(hi - lo));
    }
  }
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  c.mode = j.value("mode", c.mode);
  c.env = j.value("env", Json::object());
  c.n = j.value("n", c.n);
  if (j.contains("seeds")) {
    if (j.at("seeds").is_array())
      c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    else {
      const auto count = j.at("seeds").get<std::uint64_t>();
      c.seeds.clear();
      for (std::uint64_t s = 1; s <= count; ++s) c.seeds.push_back(s);
    }
  }
  if (c.seeds.empty()) throw std::invalid_argument("config requires at least one seed");
  c.estimators = j.value("estimators", Json::array());
  c.learners = j.value("learners", Json::array());
  if (j.contains("sweep")) {
    SweepSpec s;
    s.axis = j.at("sweep").at("axis").get<std::string>();
    s.values = j.at("sweep").at("values").get<std::vector<double>>();
    if (s.values.empty()) throw std::invalid_argument("sweep values must be non-empty");
    const bool known = s.axis == "target_time" || s.axis == "lambda" || s.axis == "n" ||
                       s.axis == "phi_cardinality" || s.axis == "alpha";
    if (!known) throw std::invalid_argument("unknown sweep axis '" + s.axis + "'");
    c.sweep = std::move(s);
  }
  if (j.contains("target")) {
    const Json& t = j.at("target");
    const std::string mode = t.value("mode", "rotate");
    if (mode == "rotate") c.target.mode = TargetSpec::Mode::kRotateSeasons;
    else if (mode == "season") c.target.mode = TargetSpec::Mode::kFixedSeason;
    else if (mode == "seconds") c.target.mode = TargetSpec::Mode::kFixedSeconds;
    else throw std::invalid_argument("unknown target mode '" + mode + "'");
    c.target.season = t.value("season", c.target.season);
    c.target.quantile = t.value("quantile", c.target.quantile);
    c.target.year = t.value("year", c.target.year);
    c.target.seasons_k = t.value("seasons_k", c.target.seasons_k);
    c.target.seconds = t.value("seconds", c.target.seconds);
  }
  c.n_mc = j.value("n_mc", c.n_mc);
  c.mc_seed = j.value("mc_seed", c.mc_seed);
  c.heldout_n = j.value("heldout_n", c.heldout_n);
  c.workers = j.value("workers", c.workers);
  c.out_dir = j.value("out", c.out_dir);
  c.plot = j.value("plot", c.plot);
  return c;
}

Json ExperimentConfig::resolved_json() const {
  Json j;
  j["mode"] = mode;
  j["env"] = env;
  j["n"] = n;
  j["seeds"] = seeds;
  j["estimators"] = estimators;
  j["learners"] = learners;
  if (sweep) j["sweep"] = Json{{"axis", sweep->axis}, {"values", sweep->values}};
  Json t;
  switch (target.mode) {
    case TargetSpec::Mode::kRotateSeasons: t["mode"] = "rotate"; break;
    case TargetSpec::Mode::kFixedSeason: t["mode"] = "season"; break;
    case TargetSpec::Mode::kFixedSeconds: t["mode"] = "seconds"; break;
  }
  t["season"] = target.season;
  t["quantile"] = target.quantile;
  t["year"] = target.year;
  t["seasons_k"] = target.seasons_k;
  t["seconds"] = target.seconds;
  j["target"] = t;
  j["n_mc"] = n_mc;
  j["mc_seed"] = mc_seed;
  j["heldout_n"] = heldout_n;
  j["workers"] = workers;
  j["out"] = out_dir;
  j["plot"] = plot;
  j["version"] = kVersion;
  return j;
}

std::vector<AggRow> aggregate_rows(const std::vector<LongRow>& rows) {
  std::map<std::pair<std::string, double>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.method, r.sweep_value}].push_back(r.estimate - r.true_value);
  std::vector<AggRow> out;
  out.reserve(groups.size());
  for (const auto& [key, errs] : groups) {
    AggRow a;
    a.method = key.first;
    a.sweep_value = key.second;
    a.n_seeds = errs.size();
    const double n = static_cast<double>(errs.size());
    double sum = 0.0, sum_sq = 0.0;
    for (double e : errs) {
      sum += e;
      sum_sq += e * e;
    }
    a.mse = sum_sq / n;
    const double bias = sum / n;
    a.bias2 = bias * bias;
    a.var = a.mse - a.bias2;  // population convention keeps the identity exact
    double sq_var = 0.0;
    for (double e : errs) {
      const double d = e * e - a.mse;
      sq_var += d * d;
    }
    a.se_mse = errs.size() > 1 ? std::sqrt(sq_var / (n - 1.0) / n) : 0.0;
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

// shared Monte Carlo truth, computed once per (env, policy, target) key
class TrueValueCache {
 public:
  SyntheticEnv::ValueEstimate get(const SyntheticEnv& env, const Policy& pi,
                                  const std::string& policy_tag, Timestamp t_prime,
                                  std::size_t n_mc, std::uint64_t mc_seed) {
    const std::string key =
        env.to_json_string() + "|" + policy_tag + "|" + std::to_string(t_prime) + "|" +
        std::to_string(n_mc) + "|" + std::to_string(mc_seed);
    {
      std::lock_guard lock(mutex_);
      if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const auto value = env.true_policy_value(pi, t_prime, n_mc, mc_seed);
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, value).first->second;
  }

 private:
  std::mutex mutex_;
  std::map<std::string, SyntheticEnv::ValueEstimate> cache_;
};

SyntheticEnv env_for_sweep(const ExperimentConfig& cfg, const SweepSpec* sweep, double value) {
  Json env_json = cfg.env;
  if (sweep) {
    if (sweep->axis == "lambda") env_json["lambda"] = value;
    if (sweep->axis == "alpha") env_json["alpha"] = value;
  }
  return SyntheticEnv(env_config_from_json(env_json));
}

std::size_t n_for_sweep(const ExperimentConfig& cfg, const SweepSpec* sweep, double value,
                        std::size_t mode_default) {
  if (sweep && sweep->axis == "n") return static_cast<std::size_t>(value);
  return cfg.n > 0 ? cfg.n : mode_default;
}

Timestamp target_for(const ExperimentConfig& cfg, const SweepSpec* sweep, double value,
                     std::uint64_t seed_index) {
  if (sweep && sweep->axis == "target_time") {
    TargetSpec t = cfg.target;
    t.mode = TargetSpec::Mode::kFixedSeason;
    t.season = static_cast<int>(value) - 1;  // seasons are 1-based in configs
    return t.resolve(seed_index);
  }
  return cfg.target.resolve(seed_index);
}

int delta_for(const SyntheticEnv& env, int periods, Timestamp t_prime) {
  const double width = static_cast<double>(env.horizon()) / periods;
  const int period0 = static_cast<int>(static_cast<double>(t_prime) / width);
  const int delta = period0 + 1 - periods;
  if (delta < 1)
    throw std::invalid_argument("prognosticator target time lies inside the logging window");
  return delta;
}

struct TaskContext {
  const ExperimentConfig& cfg;
  const SweepSpec* sweep;
  double sweep_value;
  const SyntheticEnv& env;
  const LoggedDataset& ds;
  Timestamp t_prime;
  const TimeDistribution& pt;
  const Policy& pi_e;
  std::map<std::string, RewardModel>& models;
};

const RewardModel& model_for(TaskContext& ctx, const Json& spec) {
  const Json resolved = spec.is_null() ? Json{{"kind", "direct"}} : spec;
  const std::string key = resolved.dump();
  auto it = ctx.models.find(key);
  if (it == ctx.models.end())
    it = ctx.models.emplace(key, reward_model_from_json(resolved, ctx.ds, ctx.env)).first;
  return it->second;
}

std::string method_label(const Json& spec) {
  if (spec.contains("label")) return spec.at("label").get<std::string>();
  std::string name = spec.at("name").get<std::string>();
  if (name == "prognosticator")
    name += "_d" + std::to_string(spec.value("d_prime", 3));
  return name;
}

double run_estimator(TaskContext& ctx, const Json& spec) {
  const std::string name = spec.at("name").get<std::string>();
  const Timestamp domain_end = ctx.env.config().domain_end;
  const bool phi_sweep = ctx.sweep && ctx.sweep->axis == "phi_cardinality";

  auto opfv_phi = [&]() -> TimeFeatureFn {
    if (phi_sweep)
      return features::n_equal_seasons(static_cast<int>(ctx.sweep_value), domain_end);
    if (spec.contains("phi")) return feature_from_json(spec.at("phi"), domain_end);
    return ctx.env.phi_true();
  };

  if (name == "ips") return ips(ctx.ds, ctx.pi_e).value;
  if (name == "dr")
    return dr_naive(ctx.ds, ctx.pi_e, model_for(ctx, spec.value("reward_model", Json()))).value;
  if (name == "opfv") {
    return opfv(ctx.ds, ctx.pi_e, ctx.t_prime, opfv_phi(),
                model_for(ctx, spec.value("reward_model", Json())), ctx.pt)
        .value;
  }
  if (name == "opfv_extended") {
    const TimeFeatureFn phi_x = spec.contains("phi_x")
                                    ? feature_from_json(spec.at("phi_x"), domain_end)
                                    : ctx.env.phi_x();
    const TimeFeatureFn phi_r = spec.contains("phi_r")
                                    ? feature_from_json(spec.at("phi_r"), domain_end)
                                    : ctx.env.phi_true();
    return opfv_extended(ctx.ds, ctx.pi_e, ctx.t_prime, phi_x, phi_r,
                         model_for(ctx, spec.value("reward_model", Json())), ctx.pt)
        .value;
  }
  if (name == "opfv_tuned") {
    std::vector<int> cards = spec.value("cardinalities", std::vector<int>{2, 4, 8, 16});
    std::vector<TimeFeatureFn> phis;
    phis.reserve(cards.size());
    for (int k : cards) phis.push_back(features::n_equal_seasons(k, domain_end));
    const std::size_t finest = static_cast<std::size_t>(
        std::max_element(cards.begin(), cards.end()) - cards.begin());
    const CandidateSet candidates(std::move(phis), finest);
    const RewardModel& model = model_for(ctx, spec.value("reward_model", Json()));
    const auto tuned = tune_phi(ctx.ds, ctx.pi_e, ctx.t_prime, candidates, model, ctx.pt);
    return opfv(ctx.ds, ctx.pi_e, ctx.t_prime, candidates.candidates()[tuned.selected_index],
                model, ctx.pt)
        .value;
  }
  if (name == "prognosticator") {
    PrognosticatorConfig pc;
    pc.periods = spec.value("periods", 8);
    pc.d_prime = spec.value("d_prime", 3);
    pc.delta = delta_for(ctx.env, pc.periods, ctx.t_prime);
    pc.inner = spec.value("inner", std::string("ips")) == "dr" ? InnerEstimator::kDr
                                                               : InnerEstimator::kIps;
    const RewardModel* model = nullptr;
    if (pc.inner == InnerEstimator::kDr)
      model = &model_for(ctx, spec.value("reward_model", Json()));
    pc.model = model;
    return prognosticator(ctx.ds, ctx.pi_e, pc).value;
  }
  if (name == "prognosticator_phi") {
    const int periods = spec.value("periods", 8);
    const int cycle = spec.value("cycle", periods);
    const int delta = delta_for(ctx.env, periods, ctx.t_prime);
    std::vector<int> phi_p(periods + delta);
    for (int k = 1; k <= periods + delta; ++k) phi_p[k - 1] = (k - 1) % cycle;
    return prognosticator_phi(ctx.ds, ctx.pi_e, phi_p, periods, delta).value;
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

}  // namespace

namespace {

void validate_names(const Json& specs, std::initializer_list<const char*> known,
                    const char* what) {
  for (const auto& spec : specs) {
    const std::string name = spec.at("name").get<std::string>();
    bool ok = false;
    for (const char* k : known) ok |= name == k;
    if (!ok) throw std::invalid_argument(std::string("unknown ") + what + " '" + name + "'");
  }
}

}  // namespace

ExperimentReport run_fope(const ExperimentConfig& cfg) {
  if (cfg.estimators.empty()) throw std::invalid_argument("fope requires at least one estimator");
  validate_names(cfg.estimators,
                 {"ips", "dr", "opfv", "opfv_extended", "opfv_tuned", "prognosticator",
                  "prognosticator_phi"},
                 "estimator");
  const SweepSpec* sweep = cfg.sweep ? &*cfg.sweep : nullptr;
  const std::vector<double> values = sweep ? sweep->values : std::vector<double>{0.0};
  const std::string axis = sweep ? sweep->axis : "none";

  const std::size_t n_tasks = values.size() * cfg.seeds.size();
  std::vector<std::vector<LongRow>> row_slots(n_tasks);
  std::vector<std::vector<FailureRow>> failure_slots(n_tasks);
  TrueValueCache truth;

  // env coefficients are pinned by the env seed; task seeds only drive data
  std::vector<SyntheticEnv> envs;
  envs.reserve(values.size());
  for (double v : values) envs.push_back(env_for_sweep(cfg, sweep, v));

  parallel_for(n_tasks, resolve_workers(cfg.workers), [&](std::size_t task) {
    const std::size_t vi = task / cfg.seeds.size();
    const std::size_t si = task % cfg.seeds.size();
    const double value = values[vi];
    const std::uint64_t seed = cfg.seeds[si];
    const SyntheticEnv& env = envs[vi];

    const LoggedDataset ds = env.sample_logged_data(n_for_sweep(cfg, sweep, value, 1000), seed);
    const Timestamp t_prime = target_for(cfg, sweep, value, si);
    const TimeDistribution pt = TimeDistribution::uniform(0, env.horizon());
    const auto pi_e = env.evaluation_policy();
    const double true_value =
        truth.get(env, *pi_e, "eval_policy", t_prime, cfg.n_mc, cfg.mc_seed).mean;

    std::map<std::string, RewardModel> models;
    TaskContext ctx{cfg, sweep, value, env, ds, t_prime, pt, *pi_e, models};
    for (const auto& spec : cfg.estimators) {
      const std::string label = method_label(spec);
      try {
        const double est = run_estimator(ctx, spec);
        row_slots[task].push_back({axis, value, label, seed, est, true_value});
      } catch (const std::exception& e) {
        failure_slots[task].push_back({label, value, seed, e.what()});
      }
    }
  });

  ExperimentReport report;
  report.axis = axis;
  for (auto& rows : row_slots)
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  for (auto& fails : failure_slots)
    report.failures.insert(report.failures.end(), fails.begin(), fails.end());
  report.aggregates = aggregate_rows(report.rows);
  report.meta = cfg.resolved_json();
  Json failures = Json::array();
  for (const auto& f : report.failures)
    failures.push_back(Json{{"method", f.method},
                            {"sweep_value", f.sweep_value},
                            {"seed", f.seed},
                            {"error", f.error}});
  report.meta["failures"] = failures;
  return report;
}

namespace {

struct LearnerOutcome {
  double true_value = 0.0;
  std::map<std::string, double> heldout_scores;
};

LearnerOutcome run_learner(const ExperimentConfig& cfg, const Json& spec, const SyntheticEnv& env,
                           const LoggedDataset& ds, Timestamp t_prime, std::uint64_t seed,
                           std::map<std::string, RewardModel>& models) {
  const std::string name = spec.at("name").get<std::string>();
  const Timestamp domain_end = env.config().domain_end;
  const TimeDistribution pt = TimeDistribution::uniform(0, env.horizon());

  auto model_ref = [&](const Json& mspec) -> const RewardModel& {
    const Json resolved = mspec.is_null() ? Json{{"kind", "direct"}} : mspec;
    const std::string key = resolved.dump();
    auto it = models.find(key);
    if (it == models.end())
      it = models.emplace(key, reward_model_from_json(resolved, ds, env)).first;
    return it->second;
  };

  std::shared_ptr<Policy> learned;
  if (name == "reg_based") {
    const double beta = spec.value("beta", 10.0);
    const Timestamp t_ref = spec.value("t_ref", env.horizon());
    learned = reg_based_policy(model_ref(spec.value("reward_model", Json())), beta, t_ref,
                               env.config().n_actions);
  } else {
    TrainConfig tc;
    tc.learning_rate = spec.value("learning_rate", 0.05);
    tc.iterations = spec.value("iterations", 100);
    tc.pessimism_rho = spec.value("rho", 0.0);
    tc.seed = seed;
    tc.minibatch = spec.value("minibatch", 0);
    if (name == "ips_pg") {
      tc.gradient = [](const LoggedDataset& d, const SoftmaxPolicy& p) { return ips_pg(d, p); };
    } else if (name == "dr_pg") {
      const RewardModel& model = model_ref(spec.value("reward_model", Json()));
      tc.gradient = [&model](const LoggedDataset& d, const SoftmaxPolicy& p) {
        return dr_pg(d, p, model);
      };
    } else if (name == "opfv_pg") {
      const RewardModel& model = model_ref(spec.value("reward_model", Json()));
      const TimeFeatureFn phi = spec.contains("phi")
                                    ? feature_from_json(spec.at("phi"), domain_end)
                                    : env.phi_true();
      tc.gradient = [&model, phi, t_prime, pt](const LoggedDataset& d, const SoftmaxPolicy& p) {
        return opfv_pg(d, p, t_prime, phi, model, pt);
      };
    } else if (name == "prognosticator_pg") {
      const int periods = spec.value("periods", 8);
      const int d_prime = spec.value("d_prime", 3);
      const int delta = delta_for(env, periods, t_prime);
      tc.gradient = [periods, delta, d_prime](const LoggedDataset& d, const SoftmaxPolicy& p) {
        return prognosticator_pg(d, p, periods, delta, d_prime);
      };
    } else {
      throw std::invalid_argument("unknown learner '" + name + "'");
    }
    const int hidden = spec.value("hidden_width", 0);
    const auto trained = train(
        ds, SoftmaxPolicy::random_init(env.config().n_actions, env.config().context_dim, hidden,
                                       seed),
        tc);
    learned = std::make_shared<SoftmaxPolicy>(trained.policy);
  }

  LearnerOutcome out;
  out.true_value = env.true_policy_value(*learned, t_prime, cfg.n_mc,
                                         derive_key(cfg.mc_seed, "learner-mc", seed))
                       .mean;
  if (cfg.heldout_n > 0) {
    const LoggedDataset heldout =
        env.sample_logged_data(cfg.heldout_n, derive_key(seed, "heldout"));
    const RewardModel qhat = fit_direct(heldout, features::day_of_week(domain_end));
    out.heldout_scores["dm"] = dm(heldout, *learned, qhat);
    out.heldout_scores["snips"] = snips(heldout, *learned);
    out.heldout_scores["sndr"] = sndr(heldout, *learned, qhat);
  }
  return out;
}

}  // namespace

ExperimentReport run_fopl(const ExperimentConfig& cfg) {
  if (cfg.learners.empty()) throw std::invalid_argument("fopl requires at least one learner");
  validate_names(cfg.learners, {"reg_based", "ips_pg", "dr_pg", "opfv_pg", "prognosticator_pg"},
                 "learner");
  const SweepSpec* sweep = cfg.sweep ? &*cfg.sweep : nullptr;
  const std::vector<double> values = sweep ? sweep->values : std::vector<double>{0.0};
  const std::string axis = sweep ? sweep->axis : "none";

  const std::size_t n_tasks = values.size() * cfg.seeds.size();
  std::vector<std::vector<LongRow>> row_slots(n_tasks);
  std::vector<std::vector<FailureRow>> failure_slots(n_tasks);

  std::vector<SyntheticEnv> envs;
  envs.reserve(values.size());
  for (double v : values) envs.push_back(env_for_sweep(cfg, sweep, v));

  parallel_for(n_tasks, resolve_workers(cfg.workers), [&](std::size_t task) {
    const std::size_t vi = task / cfg.seeds.size();
    const std::size_t si = task % cfg.seeds.size();
    const double value = values[vi];
    const std::uint64_t seed = cfg.seeds[si];
    const SyntheticEnv& env = envs[vi];

    const LoggedDataset ds = env.sample_logged_data(n_for_sweep(cfg, sweep, value, 8000), seed);
    const Timestamp t_prime = target_for(cfg, sweep, value, si);

    std::map<std::string, RewardModel> models;
    for (const auto& spec : cfg.learners) {
      const std::string label = method_label(spec);
      try {
        const auto outcome = run_learner(cfg, spec, env, ds, t_prime, seed, models);
        row_slots[task].push_back(
            {axis, value, label, seed, outcome.true_value, outcome.true_value});
        for (const auto& [scorer, score] : outcome.heldout_scores)
          row_slots[task].push_back(
              {axis, value, label + ":" + scorer, seed, score, outcome.true_value});
      } catch (const std::exception& e) {
        failure_slots[task].push_back({label, value, seed, e.what()});
      }
    }
  });

  ExperimentReport report;
  report.axis = axis;
  for (auto& rows : row_slots)
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  for (auto& fails : failure_slots)
    report.failures.insert(report.failures.end(), fails.begin(), fails.end());
  report.aggregates = aggregate_rows(report.rows);
  report.meta = cfg.resolved_json();
  Json failures = Json::array();
  for (const auto& f : report.failures)
    failures.push_back(Json{{"method", f.method},
                            {"sweep_value", f.sweep_value},
                            {"seed", f.seed},
                            {"error", f.error}});
  report.meta["failures"] = failures;
  return report;
}

TuneReport run_tune(const ExperimentConfig& cfg) {
  const SyntheticEnv env = env_for_sweep(cfg, nullptr, 0.0);
  const std::uint64_t seed = cfg.seeds.front();
  const LoggedDataset ds = env.sample_logged_data(cfg.n > 0 ? cfg.n : 1000, seed);
  const Timestamp t_prime = cfg.target.resolve(0);
  const TimeDistribution pt = TimeDistribution::uniform(0, env.horizon());
  const auto pi_e = env.evaluation_policy();

  std::vector<int> cards = {2, 4, 8, 16};
  if (!cfg.estimators.empty() && cfg.estimators[0].contains("cardinalities"))
    cards = cfg.estimators[0].at("cardinalities").get<std::vector<int>>();
  std::vector<TimeFeatureFn> phis;
  phis.reserve(cards.size());
  for (int k : cards) phis.push_back(features::n_equal_seasons(k, env.config().domain_end));
  const std::size_t finest =
      static_cast<std::size_t>(std::max_element(cards.begin(), cards.end()) - cards.begin());
  const CandidateSet candidates(std::move(phis), finest);

  const Json mspec = cfg.estimators.empty() ? Json() : cfg.estimators[0].value("reward_model", Json());
  const RewardModel model = reward_model_from_json(
      mspec.is_null() ? Json{{"kind", "direct"}} : mspec, ds, env);

  TuneReport report;
  report.result = tune_phi(ds, *pi_e, t_prime, candidates, model, pt);
  report.meta = cfg.resolved_json();
  return report;
}

namespace {

void write_svg_plot(const std::vector<AggRow>& aggs, const std::string& path) {
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double xmin = 1e300, xmax = -1e300, ymax = 0.0;
  for (const auto& a : aggs) {
    series[a.method].push_back({a.sweep_value, a.mse});
    xmin = std::min(xmin, a.sweep_value);
    xmax = std::max(xmax, a.sweep_value);
    ymax = std::max(ymax, a.mse);
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= 0.0) ymax = 1.0;
  const double w = 640, h = 420, m = 60;
  auto sx = [&](double x) { return m + (x - xmin) / (xmax - xmin) * (w - 2 * m); };
  auto sy = [&](double y) { return h - m - y / ymax * (h - 2 * m); };

  std::ofstream svg(path);
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<line x1='" << m << "' y1='" << h - m << "' x2='" << w - m << "' y2='" << h - m
      << "' stroke='black'/>\n";
  svg << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << h - m
      << "' stroke='black'/>\n";
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  int ci = 0;
  double ly = m;
  for (const auto& [method, pts] : series) {
    const char* color = colors[ci++ % 8];
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (const auto& [x, y] : pts) svg << sx(x) << ',' << sy(y) << ' ';
    svg << "'/>\n";
    svg << "<text x='" << w - m + 4 << "' y='" << ly << "' font-size='11' fill='" << color << "'>"
        << method << "</text>\n";
    ly += 14;
  }
  svg << "<text x='" << w / 2 << "' y='" << h - 16 << "' font-size='12'>sweep value</text>\n";
  svg << "<text x='12' y='" << m - 12 << "' font-size='12'>mse</text>\n";
  svg << "</svg>\n";
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::string& out_dir, bool plot) {
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const char* name) { return out_dir + "/" + name; };

  std::ofstream longf(path("long.csv"));
  if (!longf) throw std::runtime_error("cannot open " + path("long.csv"));
  longf << "sweep_axis,sweep_value,method,seed,estimate,true_value\n";
  for (const auto& r : report.rows)
    longf << r.axis << ',' << fmt_sweep(r.sweep_value) << ',' << r.method << ',' << r.seed << ','
          << fmt_double(r.estimate) << ',' << fmt_double(r.true_value) << '\n';

  std::ofstream aggf(path("agg.csv"));
  if (!aggf) throw std::runtime_error("cannot open " + path("agg.csv"));
  aggf << "method,sweep_value,mse,bias2,var,se_mse,n_seeds\n";
  for (const auto& a : report.aggregates)
    aggf << a.method << ',' << fmt_sweep(a.sweep_value) << ',' << fmt_double(a.mse) << ','
         << fmt_double(a.bias2) << ',' << fmt_double(a.var) << ',' << fmt_double(a.se_mse) << ','
         << a.n_seeds << '\n';

  std::ofstream metaf(path("meta.json"));
  if (!metaf) throw std::runtime_error("cannot open " + path("meta.json"));
  metaf << report.meta.dump(2) << '\n';

  if (plot) write_svg_plot(report.aggregates, path("mse.svg"));
}

void emit_tune_csv(const TuneReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "phi_id,cardinality,bias_hat,var_hat,score,selected\n";
  for (const auto& row : report.result.table) {
    f << row.phi_id << ',' << row.cardinality << ',';
    if (row.supported)
      f << fmt_double(row.bias_hat) << ',' << fmt_double(row.var_hat) << ','
        << fmt_double(row.score);
    else
      f << "nan,nan,nan";
    f << ',' << (row.selected ? 1 : 0) << '\n';
  }
}

}  // namespace opfv::harness
