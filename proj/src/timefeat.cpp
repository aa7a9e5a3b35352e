#include "opfv/timefeat.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace opfv {

namespace cal {

bool is_leap(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_year(int year) { return is_leap(year) ? 366 : 365; }

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

std::int64_t epoch_days() {
  static const std::int64_t days = days_from_civil(kEpochYear, 1, 1);
  return days;
}

Timestamp year_start(int year_index) {
  const int year = kEpochYear + year_index - 1;
  return (days_from_civil(year, 1, 1) - epoch_days()) * kSecondsPerDay;
}

int weekday_of_day(std::int64_t abs_day) {
  // 1970-01-01 was a Thursday
  return static_cast<int>(((abs_day % 7) + 7 + 4) % 7);
}

int season_of_day_of_year(int day_of_year0, int days_in_year, int k) {
  // largest i with floor(i*D/k) <= d
  const std::int64_t m = static_cast<std::int64_t>(day_of_year0 + 1) * k;
  return static_cast<int>((m + days_in_year - 1) / days_in_year) - 1;
}

std::pair<Timestamp, Timestamp> season_interval(int year_index, int k, int season) {
  const int year = kEpochYear + year_index - 1;
  const std::int64_t d = days_in_year(year);
  const Timestamp y0 = year_start(year_index);
  const Timestamp lo = y0 + (static_cast<std::int64_t>(season) * d / k) * kSecondsPerDay;
  const Timestamp hi = y0 + (static_cast<std::int64_t>(season + 1) * d / k) * kSecondsPerDay;
  return {lo, hi};
}

Timestamp season_midpoint(int year_index, int k, int season) {
  const auto [lo, hi] = season_interval(year_index, k, season);
  return lo + (hi - lo) / 2;
}

namespace {

struct DayInfo {
  CivilDate date;
  std::int64_t abs_day;
  int day_of_year0;  // 0-based
};

DayInfo day_info(Timestamp t) {
  const std::int64_t abs_day = epoch_days() + t / kSecondsPerDay;
  const CivilDate date = civil_from_days(abs_day);
  const int doy = static_cast<int>(abs_day - days_from_civil(date.year, 1, 1));
  return {date, abs_day, doy};
}

}  // namespace

}  // namespace cal

TimeFeatureFn::TimeFeatureFn(std::string id, int cardinality, Timestamp domain_end,
                             std::int64_t step_hint, std::function<int(Timestamp)> map)
    : id_(std::move(id)),
      cardinality_(cardinality),
      domain_end_(domain_end),
      step_hint_(step_hint),
      map_(std::move(map)) {
  if (cardinality_ < 1) throw std::invalid_argument("time feature cardinality must be >= 1");
  if (step_hint_ < 1) throw std::invalid_argument("time feature step hint must be >= 1");
}

int TimeFeatureFn::feature_of(Timestamp t) const {
  if (t < 0 || t > domain_end_)
    throw std::domain_error("timestamp " + std::to_string(t) + " outside domain of feature '" +
                            id_ + "' [0, " + std::to_string(domain_end_) + "]");
  const int c = map_(t);
  return c;
}

int indicator(const TimeFeatureFn& phi, Timestamp t, Timestamp t_prime) {
  return phi.feature_of(t) == phi.feature_of(t_prime) ? 1 : 0;
}

TimeDistribution TimeDistribution::uniform(Timestamp t_start, Timestamp t_end) {
  if (t_start >= t_end) throw std::invalid_argument("uniform time window requires t_start < t_end");
  TimeDistribution d;
  d.kind_ = Kind::kUniform;
  d.t_start_ = t_start;
  d.t_end_ = t_end;
  return d;
}

TimeDistribution TimeDistribution::empirical(std::vector<Timestamp> sample) {
  if (sample.empty()) throw std::invalid_argument("empirical time distribution requires samples");
  TimeDistribution d;
  d.kind_ = Kind::kEmpirical;
  d.sample_ = std::move(sample);
  return d;
}

Timestamp TimeDistribution::sample(Rng& rng) const {
  if (kind_ == Kind::kUniform) return rng.uniform_int(t_start_, t_end_ - 1);
  const auto i = rng.uniform_int(0, static_cast<std::int64_t>(sample_.size()) - 1);
  return sample_[static_cast<std::size_t>(i)];
}

double marginal_prob(const TimeFeatureFn& phi, Timestamp t_prime, const TimeDistribution& pt) {
  const int target = phi.feature_of(t_prime);
  if (pt.kind() == TimeDistribution::Kind::kEmpirical) {
    const auto& sample = pt.sample_points();
    std::size_t hits = 0;
    for (Timestamp s : sample) hits += phi.feature_of(s) == target;
    return static_cast<double>(hits) / static_cast<double>(sample.size());
  }
  const std::int64_t step = phi.step_hint();
  std::int64_t measure = 0;
  Timestamp t = pt.t_start();
  while (t < pt.t_end()) {
    const Timestamp seg_end = std::min<Timestamp>(pt.t_end(), (t / step + 1) * step);
    if (phi.feature_of(t) == target) measure += seg_end - t;
    t = seg_end;
  }
  return static_cast<double>(measure) / static_cast<double>(pt.t_end() - pt.t_start());
}

TimeFeatureFn product_feature(const TimeFeatureFn& a, const TimeFeatureFn& b) {
  if (a.domain_end() != b.domain_end())
    throw std::invalid_argument("product_feature requires factors with equal domain_end");
  const int card_b = b.cardinality();
  return TimeFeatureFn(
      a.id() + "*" + b.id(), a.cardinality() * card_b, a.domain_end(),
      std::gcd(a.step_hint(), b.step_hint()),
      [a, b, card_b](Timestamp t) { return a.feature_of(t) * card_b + b.feature_of(t); });
}

namespace features {

using cal::kSecondsPerDay;
using cal::kSecondsPerHour;

TimeFeatureFn constant(Timestamp domain_end) {
  return TimeFeatureFn("constant", 1, domain_end, kSecondsPerDay, [](Timestamp) { return 0; });
}

TimeFeatureFn n_equal_seasons(int k, Timestamp domain_end) {
  if (k < 1) throw std::invalid_argument("n_equal_seasons requires k >= 1");
  return TimeFeatureFn("season" + std::to_string(k), k, domain_end, kSecondsPerDay,
                       [k](Timestamp t) {
                         const auto info = cal::day_info(t);
                         return cal::season_of_day_of_year(info.day_of_year0,
                                                           cal::days_in_year(info.date.year), k);
                       });
}

TimeFeatureFn month(Timestamp domain_end) {
  return TimeFeatureFn("month", 12, domain_end, kSecondsPerDay,
                       [](Timestamp t) { return cal::day_info(t).date.month - 1; });
}

TimeFeatureFn week_of_month(Timestamp domain_end) {
  return TimeFeatureFn("week_of_month", 6, domain_end, kSecondsPerDay, [](Timestamp t) {
    const auto info = cal::day_info(t);
    const int dow_first = cal::weekday_of_day(info.abs_day - (info.date.day - 1));
    return (info.date.day - 1 + dow_first) / 7;
  });
}

TimeFeatureFn date(Timestamp domain_end) {
  return TimeFeatureFn("date", 31, domain_end, kSecondsPerDay,
                       [](Timestamp t) { return cal::day_info(t).date.day - 1; });
}

TimeFeatureFn day_of_week(Timestamp domain_end) {
  return TimeFeatureFn("day_of_week", 7, domain_end, kSecondsPerDay, [](Timestamp t) {
    return cal::weekday_of_day(cal::day_info(t).abs_day);
  });
}

TimeFeatureFn holiday(std::vector<std::pair<int, int>> days, Timestamp domain_end) {
  if (days.empty()) throw std::invalid_argument("holiday feature requires a calendar table");
  std::sort(days.begin(), days.end());
  return TimeFeatureFn("holiday", 2, domain_end, kSecondsPerDay, [days](Timestamp t) {
    const auto info = cal::day_info(t);
    return std::binary_search(days.begin(), days.end(),
                              std::make_pair(info.date.month, info.date.day))
               ? 1
               : 0;
  });
}

TimeFeatureFn hour(Timestamp domain_end) {
  return TimeFeatureFn("hour", 24, domain_end, kSecondsPerHour, [](Timestamp t) {
    return static_cast<int>((t % kSecondsPerDay) / kSecondsPerHour);
  });
}

TimeFeatureFn four_per_day(Timestamp domain_end) {
  return TimeFeatureFn("four_per_day", 4, domain_end, kSecondsPerHour, [](Timestamp t) {
    return static_cast<int>((t % kSecondsPerDay) / (6 * kSecondsPerHour));
  });
}

TimeFeatureFn am_pm(Timestamp domain_end) {
  return TimeFeatureFn("am_pm", 2, domain_end, kSecondsPerHour, [](Timestamp t) {
    return static_cast<int>((t % kSecondsPerDay) / (12 * kSecondsPerHour));
  });
}

TimeFeatureFn weekday_weekend(Timestamp domain_end) {
  return TimeFeatureFn("weekday_weekend", 2, domain_end, kSecondsPerDay, [](Timestamp t) {
    const int dow = cal::weekday_of_day(cal::day_info(t).abs_day);
    return (dow == 0 || dow == 6) ? 1 : 0;
  });
}

}  // namespace features

}  // namespace opfv
