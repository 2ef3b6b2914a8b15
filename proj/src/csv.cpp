#include "she/csv.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace she {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void write_dataset_header(std::ostream& out) { out << kDatasetHeader << '\n'; }

void write_dataset_rows(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) {
    out << format_double(s.u_value) << ',' << format_double(s.sigma_tilde_sq) << ','
        << format_double(s.x0) << ',' << format_double(s.t0) << ',' << s.realization_id << ','
        << format_double(s.h) << ',' << format_double(s.eps) << '\n';
  }
}

std::vector<Sample> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kDatasetHeader)
    throw ValidationError("dataset '" + path + "' lacks the header '" + kDatasetHeader + "'");
  std::vector<Sample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw ValidationError("dataset '" + path + "' line " + std::to_string(line_no) + ": expected 7 fields");
    try {
      Sample s;
      s.u_value = std::stod(f[0]);
      s.sigma_tilde_sq = std::stod(f[1]);
      s.x0 = std::stod(f[2]);
      s.t0 = std::stod(f[3]);
      s.realization_id = std::stoll(f[4]);
      s.h = std::stod(f[5]);
      s.eps = std::stod(f[6]);
      samples.push_back(s);
    } catch (const std::logic_error&) {
      throw ValidationError("dataset '" + path + "' line " + std::to_string(line_no) + ": bad number");
    }
  }
  return samples;
}

void write_curve(std::ostream& out, const CurveReport& r) {
  out << kCurveHeader << '\n';
  for (Index k = 0; k < r.u_grid.size(); ++k) {
    out << format_double(r.u_grid(k)) << ',' << format_double(r.estimate(k)) << ','
        << format_double(r.pi_lower(k)) << ',' << format_double(r.pi_upper(k)) << ','
        << format_double(r.truth(k)) << '\n';
  }
}

}  // namespace she
