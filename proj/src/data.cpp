#include "survode/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace survode {

int SurvivalDataset::events() const {
  int e = 0;
  for (int s : status) e += s;
  return e;
}

double SurvivalDataset::max_observed_time() const {
  double m = 0.0;
  for (double t : times) m = std::max(m, t);
  return m;
}

int SurvivalDataset::column_index(const std::string& name) const {
  for (int j = 0; j < p(); ++j)
    if (column_names[j] == name) return j;
  throw ValidationError("covariate '" + name + "' not found in data header");
}

void SurvivalDataset::validate() const {
  if (static_cast<int>(status.size()) != n() || covariates.rows() != n())
    throw ValidationError("dataset lengths disagree");
  for (int i = 0; i < n(); ++i) {
    if (!(times[i] > 0.0) || !std::isfinite(times[i]))
      throw ValidationError("non-positive time at row " + std::to_string(i + 1));
    if (status[i] != 0 && status[i] != 1)
      throw ValidationError("status outside {0,1} at row " + std::to_string(i + 1));
    for (int j = 0; j < p(); ++j)
      if (std::isnan(covariates(i, j)))
        throw ValidationError("missing covariate value at row " + std::to_string(i + 1) +
                              ", column '" + column_names[j] + "'");
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& cell, const std::string& origin, int row, int col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ValidationError(origin + ": non-numeric cell at row " + std::to_string(row) +
                          ", column " + std::to_string(col + 1));
  return value;
}

}  // namespace

SurvivalDataset parse_csv(std::istream& in, const std::string& origin) {
  std::string line;
  std::string header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = line;
    break;
  }
  if (header.empty()) throw ValidationError(origin + ": missing header row");
  const auto cols = split_csv_line(header);
  if (cols.size() < 2 || cols[0] != "time" || cols[1] != "status")
    throw ValidationError(origin + ": header must start with 'time,status'");

  SurvivalDataset data;
  for (std::size_t j = 2; j < cols.size(); ++j) data.column_names.push_back(cols[j]);
  const int p = static_cast<int>(data.column_names.size());

  std::vector<double> covbuf;
  int row = 1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != cols.size())
      throw ValidationError(origin + ": wrong cell count at row " + std::to_string(row));
    const double t = parse_cell(cells[0], origin, row, 0);
    if (!(t > 0.0))
      throw ValidationError(origin + ": non-positive time at row " + std::to_string(row));
    const double s = parse_cell(cells[1], origin, row, 1);
    if (s != 0.0 && s != 1.0)
      throw ValidationError(origin + ": status must be 0 or 1 at row " + std::to_string(row));
    data.times.push_back(t);
    data.status.push_back(static_cast<int>(s));
    for (int j = 0; j < p; ++j) covbuf.push_back(parse_cell(cells[2 + j], origin, row, 2 + j));
  }
  const int n = static_cast<int>(data.times.size());
  data.covariates.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) data.covariates(i, j) = covbuf[static_cast<std::size_t>(i) * p + j];
  data.validate();
  return data;
}

SurvivalDataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const SurvivalDataset& data, const std::string& path,
               const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (const auto& [k, v] : metadata) out << "# " << k << "=" << v << "\n";
  out << "time,status";
  for (const auto& name : data.column_names) out << "," << name;
  out << "\n";
  for (int i = 0; i < data.n(); ++i) {
    out << format_double(data.times[i]) << "," << data.status[i];
    for (int j = 0; j < data.p(); ++j) out << "," << format_double(data.covariates(i, j));
    out << "\n";
  }
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  Table table;
  std::string line;
  bool have_header = false;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (!have_header) {
      table.columns = cells;
      have_header = true;
      continue;
    }
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      vals.push_back(parse_cell(cells[j], path, row, static_cast<int>(j)));
    table.rows.push_back(std::move(vals));
  }
  if (!have_header) throw ValidationError(path + ": missing header row");
  return table;
}

void write_table(const Table& table, const std::string& path,
                 const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (const auto& [k, v] : metadata) out << "# " << k << "=" << v << "\n";
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j > 0) out << ",";
    out << table.columns[j];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out << ",";
      out << format_double(row[j]);
    }
    out << "\n";
  }
}

}  // namespace survode
