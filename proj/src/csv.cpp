#include "scs/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "scs/common.hpp"

namespace scs {
namespace {

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trimmed(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e)
    throw validation_error("cannot parse number '" + cell + "' at " + where);
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    lines.push_back(t);
  }
  if (lines.empty()) throw validation_error("'" + path + "' has no content");
  return lines;
}

}  // namespace

Dataset load_dataset_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  const std::vector<std::string> header = split_row(lines[0]);

  // Header layout: y, t, x1..xp, z1..zq [, m].
  if (header.empty() || header[0] != "y")
    throw validation_error("'" + path + "': missing column: y");
  if (header.size() < 2 || header[1] != "t")
    throw validation_error("'" + path + "': missing column: t");
  std::size_t col = 2;
  int p = 0;
  while (col < header.size() && header[col] == "x" + std::to_string(p + 1)) {
    ++p;
    ++col;
  }
  if (p == 0) throw validation_error("'" + path + "': no x columns found");
  int q = 0;
  while (col < header.size() && header[col] == "z" + std::to_string(q + 1)) {
    ++q;
    ++col;
  }
  bool has_m = false;
  if (col < header.size() && header[col] == "m") {
    has_m = true;
    ++col;
  }
  if (col != header.size())
    throw validation_error("'" + path + "': unexpected column '" +
                           header[col] + "'");

  const int n = static_cast<int>(lines.size()) - 1;
  if (n <= 0) throw validation_error("'" + path + "' has no data rows");

  Dataset d;
  d.y.resize(n);
  d.t.resize(n);
  d.x.resize(n, p);
  d.z.resize(n, q);
  if (has_m) d.trials.resize(n);

  int tmax = 0;
  for (int i = 0; i < n; ++i) {
    const std::string where = path + ":" + std::to_string(i + 2);
    const std::vector<std::string> cells = split_row(lines[i + 1]);
    if (cells.size() != header.size())
      throw validation_error(where + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
    d.y[i] = parse_double(cells[0], where);
    const double traw = parse_double(cells[1], where);
    const int t = static_cast<int>(std::lround(traw));
    if (std::abs(traw - t) > 1e-9 || t < 1)
      throw validation_error(where + ": t must be a positive integer");
    d.t[i] = t;
    tmax = std::max(tmax, t);
    for (int j = 0; j < p; ++j) d.x(i, j) = parse_double(cells[2 + j], where);
    for (int j = 0; j < q; ++j)
      d.z(i, j) = parse_double(cells[2 + p + j], where);
    if (has_m) d.trials[i] = parse_double(cells[2 + p + q], where);
  }
  d.n_groups = tmax;
  d.validate();
  return d;
}

Eigen::MatrixXd load_propensity_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  const std::vector<std::string> header = split_row(lines[0]);
  const int H = static_cast<int>(header.size());
  for (int h = 0; h < H; ++h)
    if (header[h] != "e" + std::to_string(h + 1))
      throw validation_error("'" + path + "': header must be e1..eH");

  const int n = static_cast<int>(lines.size()) - 1;
  if (n <= 0) throw validation_error("'" + path + "' has no data rows");
  Eigen::MatrixXd e(n, H);
  for (int i = 0; i < n; ++i) {
    const std::string where = path + ":" + std::to_string(i + 2);
    const std::vector<std::string> cells = split_row(lines[i + 1]);
    if (static_cast<int>(cells.size()) != H)
      throw validation_error(where + ": expected " + std::to_string(H) +
                             " cells");
    double sum = 0.0;
    for (int h = 0; h < H; ++h) {
      const double v = parse_double(cells[h], where);
      if (!(v > 0.0) || v > 1.0)
        throw validation_error(where + ": probabilities must lie in (0, 1]");
      e(i, h) = v;
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw validation_error(where + ": probabilities must sum to 1 (got " +
                             format_double(sum) + ")");
  }
  return e;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);  // '\n' endings on all platforms
  if (!out) throw validation_error("cannot write '" + path + "'");
  for (const std::string& c : table.comments) out << "# " << c << "\n";
  for (std::size_t j = 0; j < table.header.size(); ++j)
    out << (j ? "," : "") << table.header[j];
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw validation_error("row width does not match header in '" + path +
                             "'");
    for (std::size_t j = 0; j < row.size(); ++j)
      out << (j ? "," : "") << row[j];
    out << "\n";
  }
  if (!out) throw validation_error("write to '" + path + "' failed");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::vector<std::string>& comments) {
  CsvTable t;
  t.comments = comments;
  t.header = {"y", "t"};
  for (int j = 0; j < data.p(); ++j)
    t.header.push_back("x" + std::to_string(j + 1));
  for (int j = 0; j < data.q(); ++j)
    t.header.push_back("z" + std::to_string(j + 1));
  const bool has_m = data.trials.size() > 0;
  if (has_m) t.header.push_back("m");
  t.rows.reserve(data.n());
  for (int i = 0; i < data.n(); ++i) {
    std::vector<std::string> row;
    row.push_back(format_double(data.y[i]));
    row.push_back(std::to_string(data.t[i]));
    for (int j = 0; j < data.p(); ++j) row.push_back(format_double(data.x(i, j)));
    for (int j = 0; j < data.q(); ++j) row.push_back(format_double(data.z(i, j)));
    if (has_m) row.push_back(format_double(data.trials[i]));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_propensity_csv(const std::string& path, const Eigen::MatrixXd& e,
                          const std::vector<std::string>& comments) {
  CsvTable t;
  t.comments = comments;
  for (int h = 0; h < e.cols(); ++h)
    t.header.push_back("e" + std::to_string(h + 1));
  t.rows.reserve(e.rows());
  for (int i = 0; i < e.rows(); ++i) {
    std::vector<std::string> row;
    for (int h = 0; h < e.cols(); ++h) row.push_back(format_double(e(i, h)));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

}  // namespace scs
