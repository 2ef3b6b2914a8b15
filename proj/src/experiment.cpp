#include "she/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "she/csv.hpp"
#include "she/lattice.hpp"
#include "she/parallel.hpp"
#include "she/sigma_models.hpp"

#ifndef SHE_VERSION
#define SHE_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace she {

const char* version_string() { return SHE_VERSION; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ValidationError("bad number '" + text + "' for " + what);
  }
  if (used != t.size() || !std::isfinite(v)) throw ValidationError("bad number '" + text + "' for " + what);
  return v;
}

long long parse_integer(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    throw ValidationError("bad integer '" + text + "' for " + what);
  }
  if (used != t.size()) throw ValidationError("bad integer '" + text + "' for " + what);
  return v;
}

std::uint64_t parse_seed(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!t.empty() && t.front() == '-') throw ValidationError("seed must be non-negative");
    v = std::stoull(t, &used, 0);
  } catch (const std::logic_error&) {
    throw ValidationError("bad seed '" + text + "'");
  }
  if (used != t.size()) throw ValidationError("bad seed '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : text) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) items.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) items.push_back(cur);
  return items;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t k = 0; k < items.size(); ++k) s += (k ? "," : "") + items[k];
  return s;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// "<k>dx", "<k>h" (only when h is given) or an absolute length.
double resolve_length(const std::string& token, double dx, std::optional<double> h) {
  if (ends_with(token, "dx")) return parse_real(token.substr(0, token.size() - 2), token) * dx;
  if (ends_with(token, "h")) {
    if (!h) throw ValidationError("'" + token + "': h entries cannot be multiples of h");
    return parse_real(token.substr(0, token.size() - 1), token) * *h;
  }
  return parse_real(token, token);
}

// Manifest-only keys, skipped when a manifest is re-read as a config.
bool informational_key(const std::string& key) {
  return key == "version" || key == "diverged" || key.rfind("realization.", 0) == 0 ||
         key.rfind("dataset.", 0) == 0 || key == "deterministic_stride";
}

const char* sampling_name(PointSampling s) { return s == PointSampling::Stride ? "stride" : "uniform"; }

std::string beta_text(const std::optional<double>& beta) {
  return beta ? format_double(*beta) : std::string("white");
}

void check_stream(const std::ostream& out, const std::string& path) {
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::vector<WindowSpec> ExperimentConfig::windows() const {
  if (h_list.empty() || eps_list.empty()) throw ValidationError("h and eps lists must be non-empty");
  const double dx = grid.dx();
  std::vector<WindowSpec> out;
  for (const auto& ht : h_list) {
    const double h = resolve_length(ht, dx, std::nullopt);
    for (const auto& et : eps_list) out.push_back(WindowSpec::make(grid, h, resolve_length(et, dx, h)));
  }
  return out;
}

void ExperimentConfig::validate() const {
  grid.validate();
  if (n_realizations < 1) throw ValidationError("realizations must be >= 1");
  if (n_points < 1) throw ValidationError("points must be >= 1");
  if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be > 0");
  if (!(u_min < u_max)) throw ValidationError("u_min must be < u_max");
  if (grid_n < 2) throw ValidationError("grid_n must be >= 2");
  if (snapshot_stride < 0) throw ValidationError("snapshot_stride must be >= 0");
  if (workers < 0) throw ValidationError("workers must be >= 0");
  lh_coeff.validate();
  (void)SigmaModel::from_id(sigma_id, sigma_lipschitz);
  for (const auto& w : windows()) {
    const auto size = point_domain(grid, w).size();
    if (n_points > size)
      throw InsufficientDomain("window " + w.label() + " has " + std::to_string(size) +
                               " valid points, fewer than points = " + std::to_string(n_points));
  }
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "desk") {
    c.grid = GridConfig::make(1.0, 1.0, 128, 0, 6.0, TimeStepRule::NtEqualsNxSquared);
    c.n_realizations = 20;
    c.n_points = 2000;
    c.eps_list = {"1h", "2h", "4h"};
  } else if (name == "paper") {
    c.grid = GridConfig::make(1.0, 1.0, 512, 0, 6.0, TimeStepRule::NtEqualsNxSquared);
    c.n_realizations = 100;
    c.n_points = 10000;
    c.eps_list = {"1h", "2h", "4h", "8h"};
  } else {
    throw ValidationError("unknown preset '" + name + "' (expected desk or paper)");
  }
  c.h_list = {"2dx", "4dx", "8dx"};
  return c;
}

void apply_setting(ExperimentConfig& c, const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  auto& g = c.grid;
  if (key == "preset") {
    c.preset = value;
  } else if (key == "L") {
    g.L = parse_real(value, key);
  } else if (key == "T") {
    g.T = parse_real(value, key);
  } else if (key == "nx") {
    g.nx = parse_integer(value, key);
    if (g.rule == TimeStepRule::NtEqualsNxSquared) g.nt = g.nx * g.nx;
  } else if (key == "nt") {
    g.nt = parse_integer(value, key);
    g.rule = TimeStepRule::Explicit;
  } else if (key == "u0") {
    g.u0 = parse_real(value, key);
  } else if (key == "time_step_rule") {
    if (value == "nx2") {
      g.rule = TimeStepRule::NtEqualsNxSquared;
      g.nt = g.nx * g.nx;
    } else if (value == "explicit") {
      g.rule = TimeStepRule::Explicit;
    } else {
      throw ValidationError("time_step_rule must be nx2 or explicit");
    }
  } else if (key == "sigma") {
    c.sigma_id = value;
  } else if (key == "sigma_lipschitz") {
    c.sigma_lipschitz = parse_real(value, key);
  } else if (key == "h") {
    c.h_list = split_list(value);
  } else if (key == "eps") {
    c.eps_list = split_list(value);
  } else if (key == "realizations") {
    c.n_realizations = parse_integer(value, key);
  } else if (key == "points") {
    c.n_points = parse_integer(value, key);
  } else if (key == "seed") {
    c.master_seed = parse_seed(value);
  } else if (key == "bandwidth") {
    c.bandwidth = parse_real(value, key);
  } else if (key == "lh_coeff") {
    c.lh_coeff = LhCoefficients::parse(value);
  } else if (key == "out") {
    c.output_dir = value;
  } else if (key == "workers") {
    c.workers = parse_integer(value, key);
  } else if (key == "point_sampling") {
    if (value == "uniform") c.point_sampling = PointSampling::Uniform;
    else if (value == "stride") c.point_sampling = PointSampling::Stride;
    else throw ValidationError("point_sampling must be uniform or stride");
  } else if (key == "snapshot_stride") {
    c.snapshot_stride = parse_integer(value, key);
  } else if (key == "u_min") {
    c.u_min = parse_real(value, key);
  } else if (key == "u_max") {
    c.u_max = parse_real(value, key);
  } else if (key == "grid_n") {
    c.grid_n = parse_integer(value, key);
  } else if (informational_key(key)) {
    // manifest echo; nothing to apply
  } else {
    throw ValidationError("unknown config key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> settings;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key = value");
    settings.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return settings;
}

ExperimentConfig load_config(const std::optional<std::string>& path,
                             const std::optional<std::string>& preset_override) {
  std::vector<std::pair<std::string, std::string>> settings;
  if (path) settings = read_settings_file(*path);
  std::string preset = "desk";
  for (const auto& [k, v] : settings)
    if (k == "preset") preset = v;
  if (preset_override) preset = *preset_override;
  ExperimentConfig c = preset_config(preset);
  for (const auto& [k, v] : settings)
    if (k != "preset") apply_setting(c, k, v);
  return c;
}

std::string dataset_filename(const WindowSpec& w) { return "dataset_" + w.label() + ".csv"; }

// ---------------------------------------------------------------------------
// simulate

namespace {

void write_manifest(std::ostream& m, const ExperimentConfig& c, const std::vector<WindowSpec>& windows,
                    const std::vector<Index>& rows, const std::vector<std::optional<std::int64_t>>& diverged,
                    Index det_stride) {
  const auto& g = c.grid;
  m << "# she simulate manifest; re-usable as --config\n";
  m << "version = " << version_string() << '\n';
  m << "preset = " << c.preset << '\n';
  m << "L = " << format_double(g.L) << '\n';
  m << "T = " << format_double(g.T) << '\n';
  m << "nx = " << g.nx << '\n';
  m << "time_step_rule = " << (g.rule == TimeStepRule::NtEqualsNxSquared ? "nx2" : "explicit") << '\n';
  if (g.rule == TimeStepRule::Explicit) m << "nt = " << g.nt << '\n';
  m << "u0 = " << format_double(g.u0) << '\n';
  m << "sigma = " << c.sigma_id << '\n';
  m << "sigma_lipschitz = " << format_double(c.sigma_lipschitz) << '\n';
  m << "h = " << join(c.h_list) << '\n';
  m << "eps = " << join(c.eps_list) << '\n';
  m << "realizations = " << c.n_realizations << '\n';
  m << "points = " << c.n_points << '\n';
  m << "seed = " << c.master_seed << '\n';
  m << "bandwidth = " << format_double(c.bandwidth) << '\n';
  m << "lh_coeff = " << c.lh_coeff.to_string() << '\n';
  m << "point_sampling = " << sampling_name(c.point_sampling) << '\n';
  m << "snapshot_stride = " << c.snapshot_stride << '\n';
  m << "u_min = " << format_double(c.u_min) << '\n';
  m << "u_max = " << format_double(c.u_max) << '\n';
  m << "grid_n = " << c.grid_n << '\n';
  m << "deterministic_stride = " << det_stride << '\n';
  for (std::size_t k = 0; k < windows.size(); ++k) {
    m << "dataset." << windows[k].label() << " = " << dataset_filename(windows[k])
      << " h=" << format_double(windows[k].h) << " eps=" << format_double(windows[k].eps)
      << " rows=" << rows[k] << '\n';
  }
  std::string div;
  for (Index r = 0; r < c.n_realizations; ++r) {
    char seed[32];
    std::snprintf(seed, sizeof seed, "0x%016llx",
                  static_cast<unsigned long long>(derive_seed(c.master_seed, r, 0)));
    m << "realization." << r << ".noise_seed = " << seed << '\n';
    for (std::size_t k = 0; k < windows.size(); ++k) {
      std::snprintf(seed, sizeof seed, "0x%016llx",
                    static_cast<unsigned long long>(derive_seed(c.master_seed, r, k + 1)));
      m << "realization." << r << ".point_seed." << windows[k].label() << " = " << seed << '\n';
    }
    if (diverged[r]) {
      m << "realization." << r << ".status = diverged at step " << *diverged[r] << '\n';
      div += (div.empty() ? "" : ",") + std::to_string(r) + ":" + std::to_string(*diverged[r]);
    }
  }
  m << "diverged = " << (div.empty() ? "none" : div) << '\n';
}

}  // namespace

SimulateReport cmd_simulate(const ExperimentConfig& c) {
  c.validate();
  const SigmaModel model = SigmaModel::from_id(c.sigma_id, c.sigma_lipschitz);
  const auto windows = c.windows();
  const auto det = solve_deterministic(c.grid);
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory '" + dir.string() + "': " + ec.message());

  SimulateReport report;
  std::vector<std::ofstream> files;
  for (const auto& w : windows) {
    const fs::path p = dir / dataset_filename(w);
    files.push_back(open_output(p));
    write_dataset_header(files.back());
    report.dataset_paths.push_back(p.string());
  }
  std::ofstream snapshot;
  if (c.snapshot_stride > 0) snapshot = open_output(dir / "snapshot_r0.csv");

  const Index R = c.n_realizations;
  std::vector<std::optional<std::vector<std::vector<Sample>>>> ready(R);
  std::vector<std::optional<std::int64_t>> diverged(R);
  std::vector<char> done(R, 0);
  std::vector<Index> rows(windows.size(), 0);
  Index committed = 0;
  std::mutex mutex;

  // Completed realizations are written strictly in index order.
  auto commit_ready = [&] {
    while (committed < R && done[committed]) {
      if (auto& res = ready[committed]) {
        for (std::size_t k = 0; k < windows.size(); ++k) {
          write_dataset_rows(files[k], (*res)[k]);
          rows[k] += static_cast<Index>((*res)[k].size());
          check_stream(files[k], report.dataset_paths[k]);
        }
        res.reset();
      }
      ++committed;
    }
  };

  parallel_for(R, resolve_workers(c.workers), [&](long r) {
    std::vector<WindowPlan> plans;
    for (std::size_t k = 0; k < windows.size(); ++k)
      plans.push_back({windows[k], c.n_points, derive_seed(c.master_seed, r, k + 1), c.point_sampling});
    const NoiseSpec noise{c.master_seed, static_cast<std::uint64_t>(r)};
    StreamObserver extra;
    std::optional<SnapshotWriter> writer;
    if (r == 0 && c.snapshot_stride > 0) {
      writer.emplace(snapshot, c.snapshot_stride);
      extra = [&writer](Index j, const RollingField& f) { (*writer)(j, f); };
    }
    std::optional<std::vector<std::vector<Sample>>> result;
    std::optional<std::int64_t> failed;
    try {
      result = extract_realization(c.grid, model, noise, plans, c.lh_coeff, *det, extra);
    } catch (const SimulationDiverged& e) {
      failed = e.step();
    }
    std::lock_guard lock(mutex);
    ready[r] = std::move(result);
    diverged[r] = failed;
    done[r] = 1;
    commit_ready();
  });

  for (std::size_t k = 0; k < files.size(); ++k) {
    files[k].close();
    check_stream(files[k], report.dataset_paths[k]);
  }
  if (snapshot.is_open()) {
    snapshot.close();
    check_stream(snapshot, (dir / "snapshot_r0.csv").string());
  }
  for (Index r = 0; r < R; ++r)
    if (diverged[r]) report.diverged.emplace_back(r, *diverged[r]);

  const fs::path manifest = dir / "manifest.txt";
  auto m = open_output(manifest);
  write_manifest(m, c, windows, rows, diverged, det->stride());
  m.close();
  check_stream(m, manifest.string());
  report.manifest_path = manifest.string();
  return report;
}

// ---------------------------------------------------------------------------
// estimate

std::string cmd_estimate(const EstimateOptions& opt) {
  if (!(opt.bandwidth > 0.0)) throw ValidationError("bandwidth must be > 0");
  if (!(opt.u_min < opt.u_max) || opt.grid_n < 2) throw ValidationError("bad u-range or grid_n");
  const fs::path dataset(opt.dataset);
  std::string sigma_id;
  double lipschitz = opt.sigma_lipschitz;
  if (opt.sigma_id) {
    sigma_id = *opt.sigma_id;
  } else {
    const fs::path manifest = dataset.parent_path() / "manifest.txt";
    if (!fs::exists(manifest))
      throw ValidationError("no manifest next to '" + opt.dataset + "'; pass --sigma");
    for (const auto& [k, v] : read_settings_file(manifest.string())) {
      if (k == "sigma") sigma_id = v;
      if (k == "sigma_lipschitz" && lipschitz < 0.0) lipschitz = parse_real(v, k);
    }
    if (sigma_id.empty()) throw ValidationError("manifest '" + manifest.string() + "' has no sigma");
  }
  const SigmaModel model = SigmaModel::from_id(sigma_id, lipschitz);
  const auto samples = read_dataset(opt.dataset);
  if (samples.empty()) throw ValidationError("dataset '" + opt.dataset + "' is empty");
  const auto f = fit(std::span<const Sample>(samples), opt.bandwidth);
  const auto report = curve_report(f, model, opt.u_min, opt.u_max, opt.grid_n);

  fs::path out(opt.out);
  if (opt.out.empty()) {
    std::string stem = dataset.stem().string();
    if (stem.rfind("dataset_", 0) == 0) stem = "curve_" + stem.substr(8);
    else stem += "_curve";
    out = dataset.parent_path() / (stem + ".csv");
  }
  auto file = open_output(out);
  write_curve(file, report);
  file.close();
  check_stream(file, out.string());
  return out.string();
}

// ---------------------------------------------------------------------------
// table

TableReport cmd_table(const ExperimentConfig& c) {
  if (!(c.bandwidth > 0.0)) throw ValidationError("bandwidth must be > 0");
  const SigmaModel model = SigmaModel::from_id(c.sigma_id, c.sigma_lipschitz);
  const auto windows = c.windows();
  const fs::path dir(c.output_dir);
  TableReport table;
  for (const auto& w : windows) {
    const fs::path p = dir / dataset_filename(w);
    if (!fs::exists(p)) throw RuntimeFailure("missing dataset '" + p.string() + "'");
    const auto samples = read_dataset(p.string());
    if (samples.empty()) throw RuntimeFailure("dataset '" + p.string() + "' is empty");
    const auto f = fit(std::span<const Sample>(samples), c.bandwidth);
    table.entries.push_back({w.eps, w.h, l1_error(f, model, c.u_min, c.u_max, c.grid_n), false});
  }
  std::stable_sort(table.entries.begin(), table.entries.end(), [](const auto& a, const auto& b) {
    return a.eps != b.eps ? a.eps < b.eps : a.h < b.h;
  });
  for (std::size_t b = 0; b < table.entries.size();) {
    std::size_t e = b;
    while (e < table.entries.size() && table.entries[e].eps == table.entries[b].eps) ++e;
    auto best = std::min_element(table.entries.begin() + b, table.entries.begin() + e,
                                 [](const auto& x, const auto& y) { return x.l1_error < y.l1_error; });
    best->row_min = true;
    b = e;
  }
  const fs::path out = dir / "l1_table.csv";
  auto file = open_output(out);
  file << "eps,h,l1_error,row_min\n";
  for (const auto& t : table.entries)
    file << format_double(t.eps) << ',' << format_double(t.h) << ',' << format_double(t.l1_error) << ','
         << (t.row_min ? 1 : 0) << '\n';
  file.close();
  check_stream(file, out.string());
  table.path = out.string();
  return table;
}

void print_table(std::ostream& out, const TableReport& table) {
  std::vector<double> hs;
  for (const auto& e : table.entries)
    if (std::find(hs.begin(), hs.end(), e.h) == hs.end()) hs.push_back(e.h);
  std::sort(hs.begin(), hs.end());
  char buf[64];
  out << "  eps \\ h   ";
  for (double h : hs) {
    std::snprintf(buf, sizeof buf, "%12.6g ", h);
    out << buf;
  }
  out << '\n';
  for (std::size_t b = 0; b < table.entries.size();) {
    const double eps = table.entries[b].eps;
    std::snprintf(buf, sizeof buf, "%11.6g ", eps);
    out << buf;
    for (double h : hs) {
      auto it = std::find_if(table.entries.begin() + b, table.entries.end(),
                             [&](const auto& e) { return e.eps == eps && e.h == h; });
      if (it == table.entries.end()) {
        out << "           - ";
      } else {
        std::snprintf(buf, sizeof buf, "%11.5f%c ", it->l1_error, it->row_min ? '*' : ' ');
        out << buf;
      }
    }
    out << '\n';
    while (b < table.entries.size() && table.entries[b].eps == eps) ++b;
  }
}

// ---------------------------------------------------------------------------
// rates

RatesReport cmd_rates(const RatesOptions& opt) {
  if (opt.betas.empty() || opt.hs.size() < 2) throw ValidationError("rates needs betas and >= 2 h values");
  RatesReport report;
  for (const auto& beta : opt.betas) {
    const double rho = opt.rho ? *opt.rho : rate_exponents(beta).rho_star;
    for (double h : opt.hs) {
      RatesRow row{h, beta, rho, 0.0, std::numeric_limits<double>::quiet_NaN(), {}};
      NormalizerQuery::white(h, rho).validate();
      if (beta) NormalizerQuery::riesz(h, rho, *beta).validate();
      report.rows.push_back(row);
    }
  }
  parallel_for(static_cast<long>(report.rows.size()), resolve_workers(opt.workers), [&](long k) {
    auto& row = report.rows[k];
    try {
      row.m_hat = std::sqrt(m_hat_sq(NormalizerQuery::white(row.h, row.rho)));
      if (row.beta) row.m_riesz = std::sqrt(m_sq_riesz(NormalizerQuery::riesz(row.h, row.rho, *row.beta)));
    } catch (const QuadratureError& e) {
      row.failure = e.what();
      row.m_hat = row.m_riesz = std::numeric_limits<double>::quiet_NaN();
    }
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t b = 0; b < report.rows.size();) {
    std::size_t e = b;
    while (e < report.rows.size() && report.rows[e].beta == report.rows[b].beta) ++e;
    std::vector<double> x, y_hat, x_r, y_r;
    for (std::size_t k = b; k < e; ++k) {
      const auto& r = report.rows[k];
      if (r.m_hat > 0.0) x.push_back(r.h), y_hat.push_back(r.m_hat);
      if (r.m_riesz > 0.0) x_r.push_back(r.h), y_r.push_back(r.m_riesz);
    }
    RatesSummary s;
    s.beta = report.rows[b].beta;
    s.rho = report.rows[b].rho;
    s.slope_m_hat = x.size() >= 2 ? loglog_slope(x, y_hat) : nan;
    s.theory_m_hat = s.rho;
    s.slope_m_riesz = x_r.size() >= 2 ? loglog_slope(x_r, y_r) : nan;
    s.theory_m_riesz = s.beta ? s.rho * (3.0 - *s.beta) / 2.0 : nan;
    s.exponents = rate_exponents(s.beta);
    report.summary.push_back(s);
    b = e;
  }

  const fs::path dir(opt.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory '" + dir.string() + "': " + ec.message());
  const fs::path out = dir / "rates.csv";
  auto file = open_output(out);
  file << kRatesHeader << '\n';
  for (const auto& r : report.rows)
    file << format_double(r.h) << ',' << format_double(r.m_hat) << ',' << format_double(r.m_riesz) << ','
         << beta_text(r.beta) << ',' << format_double(r.rho) << '\n';
  file.close();
  check_stream(file, out.string());

  const fs::path sum = dir / "rates_summary.csv";
  auto sfile = open_output(sum);
  sfile << "beta,rho,slope_m_hat,theory_m_hat,slope_m_riesz,theory_m_riesz,rho_star,kappa_sup\n";
  for (const auto& s : report.summary)
    sfile << beta_text(s.beta) << ',' << format_double(s.rho) << ',' << format_double(s.slope_m_hat) << ','
          << format_double(s.theory_m_hat) << ',' << format_double(s.slope_m_riesz) << ','
          << format_double(s.theory_m_riesz) << ',' << format_double(s.exponents.rho_star) << ','
          << format_double(s.exponents.kappa_sup) << '\n';
  sfile.close();
  check_stream(sfile, sum.string());
  report.path = out.string();
  report.summary_path = sum.string();
  return report;
}

// ---------------------------------------------------------------------------
// shift demo

ShiftDemoReport cmd_shift_demo(Index n, std::uint64_t seed, bool literal, double bandwidth,
                               const std::string& output_dir) {
  const auto r = shift_demo(n, seed, literal, SigmaModel(SigmaKind::Sigma3), bandwidth);
  const fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory '" + dir.string() + "': " + ec.message());

  ShiftDemoReport rep;
  const fs::path pts = dir / "shift_demo_points.csv";
  auto pf = open_output(pts);
  pf << "x,x_tilde,y,noise\n";
  for (Index k = 0; k < r.x.size(); ++k)
    pf << format_double(r.x(k)) << ',' << format_double(r.x_tilde(k)) << ',' << format_double(r.y(k))
       << ',' << format_double(r.noise(k)) << '\n';
  pf.close();
  check_stream(pf, pts.string());

  const fs::path cur = dir / "shift_demo_curve.csv";
  auto cf = open_output(cur);
  cf << "u,estimate,truth\n";
  for (Index k = 0; k < r.grid.size(); ++k)
    cf << format_double(r.grid(k)) << ',' << format_double(r.fitted(k)) << ',' << format_double(r.truth(k))
       << '\n';
  cf.close();
  check_stream(cf, cur.string());

  auto peaks = [&](const Eigen::VectorXd& v) {
    auto idx = local_maxima(r.grid, v, 1.0, 3.0);
    if (idx.size() > 2) idx.resize(2);
    std::vector<double> xs;
    for (Index i : idx) xs.push_back(r.grid(i));
    std::sort(xs.begin(), xs.end());
    return xs;
  };
  rep.fitted_peaks = peaks(r.fitted);
  rep.true_peaks = peaks(r.truth);
  rep.noise_mean = r.noise.mean();
  rep.points_path = pts.string();
  rep.curve_path = cur.string();
  return rep;
}

// ---------------------------------------------------------------------------
// verify

bool run_verify(std::ostream& out) {
  bool all = true;
  auto check = [&](const char* name, const std::function<std::string()>& body) {
    std::string failure;
    try {
      failure = body();
    } catch (const std::exception& e) {
      failure = std::string("threw: ") + e.what();
    }
    out << (failure.empty() ? "PASS " : "FAIL ") << name << (failure.empty() ? "" : ": " + failure) << '\n';
    all = all && failure.empty();
  };

  const GridConfig small = GridConfig::make(1.0, 1.0, 16, 0, 6.0, TimeStepRule::NtEqualsNxSquared);

  check("drift eigenvector", [&] {
    const Index n = small.nx;
    Vector v(n);
    const double k = 3.0 * std::numbers::pi / static_cast<double>(n - 1);
    for (Index i = 0; i < n; ++i) v(i) = std::sin(k * static_cast<double>(i));
    v(0) = v(n - 1) = 0.0;
    const Vector d = apply_drift(v, small);
    const double lambda = -0.5 * double(n) * double(n) * 2.0 * (1.0 - std::cos(k));
    const double err = (d.segment(1, n - 2) - lambda * v.segment(1, n - 2)).cwiseAbs().maxCoeff();
    return err < 1e-9 * std::fabs(lambda) ? std::string() : "residual " + format_double(err);
  });

  check("L^h annihilates affine fields, -2 on x^2", [&] {
    const WindowSpec w = WindowSpec::make(small, 2.0 / 16, 2.0 / 16);
    Matrix affine(small.nx, small.rows()), square(small.nx, small.rows());
    for (Index j = 0; j < small.rows(); ++j)
      for (Index i = 0; i < small.nx; ++i) {
        const double x = i * small.dx();
        affine(i, j) = 3.0 - 2.0 * x;
        square(i, j) = x * x;
      }
    const auto c = LhCoefficients::paper_exact();
    const double a = apply_Lh(DenseField(affine), 5, 3, w, c);
    const double s = apply_Lh(DenseField(square), 5, 3, w, c);
    if (std::fabs(a) > 1e-10) return "affine gives " + format_double(a);
    if (std::fabs(s + 2.0) > 2e-10) return "x^2 gives " + format_double(s);
    return std::string();
  });

  check("zero model gives zero sigma_tilde", [&] {
    const WindowSpec w = WindowSpec::make(small, 2.0 / 16, 2.0 / 16);
    const auto d = extract_dataset(small, SigmaModel(SigmaKind::Zero), {7, 0}, w,
                                   LhCoefficients::generator_matched(), 50, 11);
    for (const auto& s : d)
      if (s.sigma_tilde_sq != 0.0) return "non-zero value " + format_double(s.sigma_tilde_sq);
    return std::string();
  });

  check("extraction is deterministic and non-negative", [&] {
    const WindowSpec w = WindowSpec::make(small, 2.0 / 16, 2.0 / 16);
    const SigmaModel m(SigmaKind::Sigma3);
    const auto a = extract_dataset(small, m, {7, 1}, w, LhCoefficients::generator_matched(), 50, 11);
    const auto b = extract_dataset(small, m, {7, 1}, w, LhCoefficients::generator_matched(), 50, 11);
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].sigma_tilde_sq != b[k].sigma_tilde_sq || a[k].u_value != b[k].u_value)
        return std::string("rerun differs");
      if (!(a[k].sigma_tilde_sq >= 0.0)) return std::string("negative value");
    }
    return std::string();
  });

  check("regression of a constant is flat", [&] {
    std::vector<Observation> obs;
    for (int k = 0; k < 20; ++k) obs.push_back({0.2 * k, 1.5});
    const auto f = fit(std::span<const Observation>(obs), 0.3);
    const auto [lo, hi] = f.prediction_interval(1.7);
    if (std::fabs(f.predict(1.7) - 1.5) > 1e-12 || std::fabs(lo - 1.5) > 1e-12 || std::fabs(hi - 1.5) > 1e-12)
      return std::string("not flat");
    return std::string();
  });

  check("heat kernel has unit mass", [&] {
    double sum = 0.0;
    const double dx = 1e-3;
    for (int k = -20000; k <= 20000; ++k) sum += heat_kernel(k * dx, 0.3) * dx;
    return std::fabs(sum - 1.0) < 1e-10 ? std::string() : "mass " + format_double(sum);
  });

  check("rate exponents", [&] {
    const auto w = rate_exponents();
    const auto r = rate_exponents(0.5);
    if (std::fabs(w.rho_star - 8.0 / 9.0) > 1e-15 || std::fabs(w.kappa_sup - 2.0 / 9.0) > 1e-15)
      return std::string("white exponents");
    if (std::fabs(r.rho_star - 16.0 / 23.0) > 1e-15 || std::fabs(r.kappa_sup - 6.0 / 23.0) > 1e-15)
      return std::string("beta=0.5 exponents");
    return std::string();
  });

  check("sigma models non-negative and Lipschitz", [&] {
    for (auto kind : {SigmaKind::Sigma1, SigmaKind::Sigma2, SigmaKind::Sigma3, SigmaKind::Sigma4,
                      SigmaKind::Sigma5, SigmaKind::Sigma6, SigmaKind::Sigma7, SigmaKind::Zero}) {
      const SigmaModel m(kind);
      double prev = m.sigma(-8.0);
      for (int k = 1; k <= 1600; ++k) {
        const double u = -8.0 + 0.01 * k;
        const double v = m.sigma(u);
        if (std::fabs(v - prev) > m.lipschitz() * 0.01 * (1.0 + 1e-9) + 1e-15)
          return m.id() + " exceeds its Lipschitz constant";
        prev = v;
      }
    }
    return std::string();
  });

  check("white normalizer approaches 2 eps^2 from below", [&] {
    auto ratio = [](double h) {
      const auto q = NormalizerQuery::white(h, 8.0 / 9.0);
      return m_hat_sq(q) / (2.0 * q.eps() * q.eps());
    };
    const double coarse = ratio(1.0 / 64), fine = ratio(1.0 / 4096);
    if (!(coarse > 0.0 && coarse < fine && fine < 1.0))
      return "ratios " + format_double(coarse) + ", " + format_double(fine);
    return std::string();
  });

  out << (all ? "verify: all checks passed" : "verify: FAILURES") << '\n';
  return all;
}

}  // namespace she
