#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "she/analysis.hpp"
#include "she/grid.hpp"
#include "she/predictor.hpp"
#include "she/regression.hpp"

namespace she {

/// Version string baked in at configure time.
const char* version_string();

struct ExperimentConfig {
  std::string preset = "desk";
  GridConfig grid = GridConfig::make(1.0, 1.0, 128, 128 * 128, 6.0);
  std::string sigma_id = "sigma3";
  double sigma_lipschitz = -1.0;  // required for custom:<expr> models
  /// h entries: "<k>dx" or an absolute length. eps entries: "<k>h", "<k>dx" or absolute.
  std::vector<std::string> h_list = {"2dx", "4dx", "8dx"};
  std::vector<std::string> eps_list = {"1h", "2h", "4h"};
  Index n_realizations = 20;
  Index n_points = 2000;
  std::uint64_t master_seed = 20240601;
  double bandwidth = 0.05;
  LhCoefficients lh_coeff = LhCoefficients::generator_matched();
  std::string output_dir = "she_out";
  long workers = 0;  // 0: hardware concurrency
  PointSampling point_sampling = PointSampling::Uniform;
  Index snapshot_stride = 0;  // 0: no snapshot of realization 0
  double u_min = 0.0;
  double u_max = 4.0;
  Index grid_n = 512;

  /// Resolved (h, eps) matrix in h-major order.
  std::vector<WindowSpec> windows() const;
  void validate() const;
};

/// "desk" or "paper".
ExperimentConfig preset_config(const std::string& name);

/// Applies one key = value setting; unknown keys are validation errors.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Reads a flat `key = value` file (# starts a comment) in file order.
std::vector<std::pair<std::string, std::string>> read_settings_file(const std::string& path);

/// Preset (named in the file, or `fallback_preset`) with every file setting applied.
ExperimentConfig load_config(const std::optional<std::string>& path,
                             const std::optional<std::string>& preset_override);

std::string dataset_filename(const WindowSpec& w);

struct SimulateReport {
  std::vector<std::string> dataset_paths;
  std::vector<std::pair<Index, std::int64_t>> diverged;  // (realization, step)
  std::string manifest_path;
};

SimulateReport cmd_simulate(const ExperimentConfig& cfg);

struct EstimateOptions {
  std::string dataset;
  std::optional<std::string> sigma_id;  // overrides the manifest next to the dataset
  double sigma_lipschitz = -1.0;
  double bandwidth = 0.05;
  double u_min = 0.0;
  double u_max = 4.0;
  Index grid_n = 512;
  std::string out;  // empty: <dataset stem>_curve.csv
};

std::string cmd_estimate(const EstimateOptions& opt);

struct TableEntry {
  double eps = 0.0;
  double h = 0.0;
  double l1_error = 0.0;
  bool row_min = false;
};

struct TableReport {
  std::vector<TableEntry> entries;  // eps ascending, then h ascending
  std::string path;
};

TableReport cmd_table(const ExperimentConfig& cfg);
void print_table(std::ostream& out, const TableReport& table);

struct RatesOptions {
  std::vector<std::optional<double>> betas = {std::nullopt, 0.25, 0.5, 0.75};  // nullopt: white
  std::vector<double> hs = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
  std::optional<double> rho;  // default: rho_star of each beta
  std::string output_dir = "she_out";
  long workers = 0;
};

struct RatesRow {
  double h = 0.0;
  std::optional<double> beta;
  double rho = 0.0;
  double m_hat = 0.0;
  double m_riesz = 0.0;  // NaN for white rows
  std::string failure;   // non-empty if quadrature failed
};

struct RatesSummary {
  std::optional<double> beta;
  double rho = 0.0;
  double slope_m_hat = 0.0;
  double theory_m_hat = 0.0;
  double slope_m_riesz = 0.0;
  double theory_m_riesz = 0.0;
  RateExponents exponents;
};

struct RatesReport {
  std::vector<RatesRow> rows;
  std::vector<RatesSummary> summary;
  std::string path, summary_path;
};

RatesReport cmd_rates(const RatesOptions& opt);

struct ShiftDemoReport {
  std::string points_path, curve_path;
  std::vector<double> fitted_peaks, true_peaks;
  double noise_mean = 0.0;
};

ShiftDemoReport cmd_shift_demo(Index n, std::uint64_t seed, bool literal, double bandwidth,
                               const std::string& output_dir);

/// Quick invariant checks; one line per check. Returns true if all pass.
bool run_verify(std::ostream& out);

}  // namespace she
