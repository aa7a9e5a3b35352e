#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opfv/env.hpp"
#include "opfv/estimators.hpp"
#include "opfv/learning.hpp"
#include "opfv/tuning.hpp"

namespace opfv::harness {

using Json = nlohmann::json;

// config-file naming of time features, e.g. {"kind":"n_equal_seasons",
// "params":{"k":8}} or {"kind":"product","factors":[...]}
TimeFeatureFn feature_from_json(const Json& spec, Timestamp domain_end);

RewardModel reward_model_from_json(const Json& spec, const LoggedDataset& ds,
                                   const SyntheticEnv& env);

// dot-path override, e.g. apply_override(cfg, "env.lambda", "1.0")
void apply_override(Json& config, const std::string& key, const std::string& value);

struct TargetSpec {
  enum class Mode { kRotateSeasons, kFixedSeason, kFixedSeconds };
  Mode mode = Mode::kRotateSeasons;
  int season = 0;       // 0-based, used by kFixedSeason
  double quantile = 0.5;
  int year = 2;
  int seasons_k = 8;
  Timestamp seconds = 0;  // used by kFixedSeconds

  Timestamp resolve(std::uint64_t seed_index) const;
};

struct SweepSpec {
  std::string axis;  // target_time | lambda | n | phi_cardinality | alpha
  std::vector<double> values;
};

struct ExperimentConfig {
  std::string mode = "fope";  // fope | fopl | tune | sweep
  Json env;                   // EnvConfig overrides (seed fixes coefficients)
  std::size_t n = 0;          // 0 -> mode default (1000 fope, 8000 fopl)
  std::vector<std::uint64_t> seeds = {1};
  Json estimators = Json::array();
  Json learners = Json::array();
  std::optional<SweepSpec> sweep;
  TargetSpec target;
  std::size_t n_mc = 100000;
  std::uint64_t mc_seed = 777;
  std::size_t heldout_n = 0;  // fopl: score learned policies on a held-out log
  int workers = 0;            // 0 -> OPFV_NUM_WORKERS or hardware concurrency
  std::string out_dir = "out";
  bool plot = false;

  static ExperimentConfig from_json(const Json& j);
  Json resolved_json() const;
};

struct LongRow {
  std::string axis;
  double sweep_value = 0.0;
  std::string method;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  double true_value = 0.0;
};

struct AggRow {
  std::string method;
  double sweep_value = 0.0;
  double mse = 0.0;
  double bias2 = 0.0;
  double var = 0.0;
  double se_mse = 0.0;
  std::size_t n_seeds = 0;
};

struct FailureRow {
  std::string method;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  std::string error;
};

struct ExperimentReport {
  std::string axis;
  std::vector<LongRow> rows;
  std::vector<AggRow> aggregates;
  std::vector<FailureRow> failures;
  Json meta;
};

// aggregate error rows per (method, sweep value); mse = bias2 + var holds
// exactly (population-variance convention), failures never enter
std::vector<AggRow> aggregate_rows(const std::vector<LongRow>& rows);

ExperimentReport run_fope(const ExperimentConfig& cfg);
ExperimentReport run_fopl(const ExperimentConfig& cfg);

struct TuneReport {
  TuneResult result;
  Json meta;
};
TuneReport run_tune(const ExperimentConfig& cfg);

// writes long.csv, agg.csv, meta.json (and per-method SVG charts when
// requested); byte-stable for identical inputs
void emit_report(const ExperimentReport& report, const std::string& out_dir, bool plot = false);
void emit_tune_csv(const TuneReport& report, const std::string& path);

}  // namespace opfv::harness
