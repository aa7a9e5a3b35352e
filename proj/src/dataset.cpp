#include "opfv/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace opfv {

LoggedDataset::LoggedDataset(std::vector<LoggedRecord> records, Timestamp horizon, int n_actions,
                             int context_dim)
    : records_(std::move(records)), horizon_(horizon), n_actions_(n_actions),
      context_dim_(context_dim) {
  if (records_.empty()) throw std::invalid_argument("dataset requires at least one record");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    if (!(rec.propensity > 0.0))
      throw std::invalid_argument("record " + std::to_string(i) +
                                  " violates common support: propensity must be > 0");
    if (rec.t < 0 || rec.t > horizon_)
      throw std::invalid_argument("record " + std::to_string(i) + " timestamp outside [0, horizon]");
    if (rec.action < 0 || rec.action >= n_actions_)
      throw std::invalid_argument("record " + std::to_string(i) + " action out of range");
    if (rec.context.size() != context_dim_)
      throw std::invalid_argument("record " + std::to_string(i) + " context dimension mismatch");
  }
}

LoggedDataset LoggedDataset::slice(std::size_t begin, std::size_t end) const {
  std::vector<LoggedRecord> out(records_.begin() + begin, records_.begin() + end);
  return LoggedDataset(std::move(out), horizon_, n_actions_, context_dim_);
}

namespace io {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_dataset_csv(const LoggedDataset& ds, const std::string& csv_path,
                       const std::string& sidecar_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path + " for writing");
  csv << "t";
  for (int d = 0; d < ds.context_dim(); ++d) csv << ",x_" << d;
  csv << ",a,r,pscore\n";
  for (const auto& rec : ds.records()) {
    csv << rec.t;
    for (int d = 0; d < ds.context_dim(); ++d) csv << ',' << fmt_double(rec.context[d]);
    csv << ',' << rec.action << ',' << fmt_double(rec.reward) << ',' << fmt_double(rec.propensity)
        << '\n';
  }

  nlohmann::json meta;
  meta["horizon"] = ds.horizon();
  meta["n_actions"] = ds.n_actions();
  meta["context_dim"] = ds.context_dim();
  meta["n"] = ds.size();
  std::ofstream side(sidecar_path);
  if (!side) throw std::runtime_error("cannot open " + sidecar_path + " for writing");
  side << meta.dump(2) << '\n';
}

LoggedDataset read_dataset_csv(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream side(sidecar_path);
  if (!side) throw std::runtime_error("cannot open " + sidecar_path);
  nlohmann::json meta = nlohmann::json::parse(side);
  const Timestamp horizon = meta.at("horizon").get<Timestamp>();
  const int n_actions = meta.at("n_actions").get<int>();
  const int context_dim = meta.at("context_dim").get<int>();

  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(csv, line)) throw std::runtime_error("empty dataset file " + csv_path);

  std::vector<LoggedRecord> records;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    LoggedRecord rec;
    rec.context.resize(context_dim);
    std::getline(ss, cell, ',');
    rec.t = std::stoll(cell);
    for (int d = 0; d < context_dim; ++d) {
      std::getline(ss, cell, ',');
      rec.context[d] = std::stod(cell);
    }
    std::getline(ss, cell, ',');
    rec.action = std::stoi(cell);
    std::getline(ss, cell, ',');
    rec.reward = std::stod(cell);
    std::getline(ss, cell, ',');
    rec.propensity = std::stod(cell);
    records.push_back(std::move(rec));
  }
  return LoggedDataset(std::move(records), horizon, n_actions, context_dim);
}

}  // namespace io

}  // namespace opfv
