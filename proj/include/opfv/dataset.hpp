#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "opfv/timefeat.hpp"

namespace opfv {

struct LoggedRecord {
  Eigen::VectorXd context;
  Timestamp t = 0;
  int action = 0;
  double reward = 0.0;
  double propensity = 1.0;  // pi_0(a | x, t), must be > 0
};

// Immutable collection of logged interactions over the window [0, horizon].
class LoggedDataset {
 public:
  LoggedDataset(std::vector<LoggedRecord> records, Timestamp horizon, int n_actions,
                int context_dim);

  const std::vector<LoggedRecord>& records() const { return records_; }
  const LoggedRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  Timestamp horizon() const { return horizon_; }
  int n_actions() const { return n_actions_; }
  int context_dim() const { return context_dim_; }

  LoggedDataset slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<LoggedRecord> records_;
  Timestamp horizon_;
  int n_actions_;
  int context_dim_;
};

namespace io {

// CSV columns: t,x_0..x_{d-1},a,r,pscore. The sidecar JSON carries horizon,
// n_actions, context_dim and record count.
void write_dataset_csv(const LoggedDataset& ds, const std::string& csv_path,
                       const std::string& sidecar_path);
LoggedDataset read_dataset_csv(const std::string& csv_path, const std::string& sidecar_path);

}  // namespace io

}  // namespace opfv
