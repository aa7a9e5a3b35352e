#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "opfv/rng.hpp"

namespace opfv {

// Timestamps are integer seconds since the simulation epoch
// (Year 1 = 2025-01-01 00:00:00 UTC, proleptic Gregorian).
using Timestamp = std::int64_t;

namespace cal {

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr int kEpochYear = 2025;

bool is_leap(int year);
int days_in_year(int year);

// days since 1970-01-01 (negative before)
std::int64_t days_from_civil(int year, int month, int day);

struct CivilDate {
  int year;
  int month;  // 1..12
  int day;    // 1..31
};
CivilDate civil_from_days(std::int64_t days);

std::int64_t epoch_days();                // absolute day of the epoch
Timestamp year_start(int year_index);     // 1-based: year 1 starts at t = 0
int weekday_of_day(std::int64_t abs_day); // 0 = Sunday

// k-partition of a calendar year into intervals of as-equal-as-possible
// day counts; interval i covers 0-based days [floor(i*D/k), floor((i+1)*D/k)).
int season_of_day_of_year(int day_of_year0, int days_in_year, int k);

// [start, end) in seconds for `season` (0-based) of `year_index` (1-based)
std::pair<Timestamp, Timestamp> season_interval(int year_index, int k, int season);
Timestamp season_midpoint(int year_index, int k, int season);

}  // namespace cal

// A total, deterministic clustering of timestamps into a finite feature set.
class TimeFeatureFn {
 public:
  TimeFeatureFn() = default;
  TimeFeatureFn(std::string id, int cardinality, Timestamp domain_end,
                std::int64_t step_hint, std::function<int(Timestamp)> map);

  const std::string& id() const { return id_; }
  int cardinality() const { return cardinality_; }
  Timestamp domain_end() const { return domain_end_; }
  // The map is constant on [m*step_hint, (m+1)*step_hint); used for exact
  // interval-measure marginals. Arbitrary user maps fall back to a 1h grid.
  std::int64_t step_hint() const { return step_hint_; }

  int feature_of(Timestamp t) const;
  int operator()(Timestamp t) const { return feature_of(t); }

 private:
  std::string id_;
  int cardinality_ = 1;
  Timestamp domain_end_ = 0;
  std::int64_t step_hint_ = cal::kSecondsPerHour;
  std::function<int(Timestamp)> map_;
};

int indicator(const TimeFeatureFn& phi, Timestamp t, Timestamp t_prime);

// Distribution of logging timestamps p(t).
class TimeDistribution {
 public:
  enum class Kind { kUniform, kEmpirical };

  // uniform over [t_start, t_end)
  static TimeDistribution uniform(Timestamp t_start, Timestamp t_end);
  static TimeDistribution empirical(std::vector<Timestamp> sample);

  Kind kind() const { return kind_; }
  Timestamp t_start() const { return t_start_; }
  Timestamp t_end() const { return t_end_; }
  const std::vector<Timestamp>& sample_points() const { return sample_; }

  Timestamp sample(Rng& rng) const;

 private:
  Kind kind_ = Kind::kUniform;
  Timestamp t_start_ = 0;
  Timestamp t_end_ = 0;
  std::vector<Timestamp> sample_;
};

// p(phi(t')) over the logging window. Returns 0 when the feature of t' has
// no support; callers treat that as a common-time-feature-support violation.
double marginal_prob(const TimeFeatureFn& phi, Timestamp t_prime, const TimeDistribution& pt);

TimeFeatureFn product_feature(const TimeFeatureFn& a, const TimeFeatureFn& b);

namespace features {

TimeFeatureFn constant(Timestamp domain_end);
TimeFeatureFn n_equal_seasons(int k, Timestamp domain_end);
TimeFeatureFn month(Timestamp domain_end);
TimeFeatureFn week_of_month(Timestamp domain_end);
TimeFeatureFn date(Timestamp domain_end);
TimeFeatureFn day_of_week(Timestamp domain_end);
// `days` holds (month, day) pairs recurring annually
TimeFeatureFn holiday(std::vector<std::pair<int, int>> days, Timestamp domain_end);
TimeFeatureFn hour(Timestamp domain_end);
TimeFeatureFn four_per_day(Timestamp domain_end);
TimeFeatureFn am_pm(Timestamp domain_end);
TimeFeatureFn weekday_weekend(Timestamp domain_end);

}  // namespace features

}  // namespace opfv
