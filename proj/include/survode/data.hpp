#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace survode {

// Validation problems (bad CSV cells, schema violations) raised with the
// offending location; the CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failures (optimization dead in the -inf region, non-PD Hessian,
// solver breakdown); the CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Observed times, event indicators and the covariate matrix.
struct SurvivalDataset {
  std::vector<double> times;
  std::vector<int> status;  // 1 = event, 0 = right-censored
  Eigen::MatrixXd covariates;  // n x p
  std::vector<std::string> column_names;

  int n() const { return static_cast<int>(times.size()); }
  int p() const { return static_cast<int>(column_names.size()); }
  int events() const;
  int censored() const { return n() - events(); }
  double max_observed_time() const;

  int column_index(const std::string& name) const;  // throws ValidationError
  void validate() const;
};

// CSV with header `time,status,<covariates...>`; '#' lines are ignored.
SurvivalDataset ingest_csv(const std::string& path);
SurvivalDataset parse_csv(std::istream& in, const std::string& origin);

void write_csv(const SurvivalDataset& data, const std::string& path,
               const std::map<std::string, std::string>& metadata = {});

// Generic numeric table (used for draws and curve files). Comment lines are
// skipped; returns column names and row-major values.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
Table read_table(const std::string& path);
void write_table(const Table& table, const std::string& path,
                 const std::map<std::string, std::string>& metadata = {});

// Deterministic formatting used for every numeric artifact.
std::string format_double(double v);

}  // namespace survode
