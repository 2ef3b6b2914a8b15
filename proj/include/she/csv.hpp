#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "she/predictor.hpp"
#include "she/regression.hpp"

namespace she {

/// Shortest-round-trip-safe text form used in every CSV: printf "%.17g".
std::string format_double(double v);

inline constexpr const char* kDatasetHeader = "u_value,sigma_tilde_sq,x0,t0,realization_id,h,eps";
inline constexpr const char* kCurveHeader = "u,estimate,pi_lower,pi_upper,truth";
inline constexpr const char* kRatesHeader = "h,m_hat,m_riesz,beta,rho";

void write_dataset_header(std::ostream& out);
void write_dataset_rows(std::ostream& out, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(const std::string& path);

void write_curve(std::ostream& out, const CurveReport& report);

/// Splits one CSV line on commas (no quoting; none of our files need it).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace she
