#pragma once

#include <Eigen/Core>
#include <concepts>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <functional>
#include <random>
#include <utility>

#include "she/errors.hpp"
#include "she/grid.hpp"
#include "she/sigma_models.hpp"

namespace she {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Drift stencil: (nx^2/2)(u_{i-1} - 2u_i + u_{i+1}) on interior rows, zero rows
// at both boundaries. Never materialized as a matrix.

template <typename InDerived, typename OutDerived>
void drift_into(const Eigen::MatrixBase<InDerived>& state, double coefficient,
                Eigen::MatrixBase<OutDerived>& out) {
  using Scalar = typename InDerived::Scalar;
  const Index n = state.size();
  out.derived().resize(n);
  const Scalar c(coefficient);
  out.segment(1, n - 2) =
      c * (state.segment(0, n - 2) - Scalar(2) * state.segment(1, n - 2) + state.segment(2, n - 2));
  out(0) = Scalar(0);
  out(n - 1) = Scalar(0);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply_drift(
    const Eigen::MatrixBase<Derived>& state, const GridConfig& cfg) {
  if (state.size() != cfg.nx) throw ValidationError("apply_drift: state length != nx");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out(state.size());
  const double n = static_cast<double>(cfg.nx);
  drift_into(state, 0.5 * n * n, out);
  return out;
}

/// One Euler--Maruyama step with preallocated scratch. `gauss` holds one standard
/// normal per site (boundary entries are ignored).
class EulerMaruyama {
 public:
  EulerMaruyama(const GridConfig& cfg, const SigmaModel& model)
      : model_(model),
        dt_(cfg.dt()),
        drift_coef_(0.5 * static_cast<double>(cfg.nx) * static_cast<double>(cfg.nx)),
        noise_scale_(std::sqrt(cfg.dt()) * std::sqrt(static_cast<double>(cfg.nx))),
        drift_(cfg.nx),
        nx_(cfg.nx) {}

  template <typename In, typename G, typename Out>
  void step(const Eigen::MatrixBase<In>& state, const Eigen::MatrixBase<G>& gauss,
            Eigen::MatrixBase<Out>& out, std::int64_t step_index = -1) {
    if (state.size() != nx_ || gauss.size() != nx_)
      throw ValidationError("em_step: vector length != nx");
    drift_into(state, drift_coef_, drift_);
    out.derived().resize(nx_);
    out = state + dt_ * drift_;
    if (model_.kind() != SigmaKind::Zero) {
      for (Index i = 1; i + 1 < nx_; ++i)
        out(i) += noise_scale_ * model_.sigma(state(i)) * gauss(i);
    }
    out(0) = 0.0;
    out(nx_ - 1) = 0.0;
    if (!out.allFinite()) throw SimulationDiverged(step_index);
  }

  const SigmaModel& model() const { return model_; }

 private:
  SigmaModel model_;
  double dt_;
  double drift_coef_;
  double noise_scale_;
  Vector drift_;
  Index nx_;
};

template <typename Derived, typename G>
Vector em_step(const Eigen::MatrixBase<Derived>& state, const GridConfig& cfg,
               const SigmaModel& model, const Eigen::MatrixBase<G>& gauss) {
  EulerMaruyama stepper(cfg, model);
  Vector out(cfg.nx);
  stepper.step(state, gauss, out);
  return out;
}

/// Initial row: u0 on the interior, 0 at both boundary sites.
Vector initial_row(const GridConfig& cfg);

// ---------------------------------------------------------------------------
// Field views: anything with sites(), resident(j) and a contiguous row(j).

template <class F>
concept FieldView = requires(const F& f, Index j) {
  { f.sites() } -> std::convertible_to<Index>;
  { f.resident(j) } -> std::convertible_to<bool>;
  f.row(j);
};

/// Ring buffer holding the most recent `depth` rows of one realization.
template <class Scalar>
class BasicRollingField {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Row = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicRollingField(Index sites, Index depth) : data_(sites, depth) {
    if (sites < 1) throw ValidationError("RollingField needs at least one site");
    if (depth < 2) throw ValidationError("RollingField depth must be >= 2");
    data_.setZero();
  }

  Index sites() const { return data_.rows(); }
  Index depth() const { return data_.cols(); }
  /// Time index of the latest row, or -1 before the first push.
  Index newest() const { return newest_; }

  bool resident(Index j) const { return j >= 0 && j <= newest_ && j > newest_ - depth(); }

  typename Storage::ConstColXpr row(Index j) const {
    if (!resident(j))
      throw WindowUnavailable("row " + std::to_string(j) + " not resident (newest " +
                              std::to_string(newest_) + ", depth " + std::to_string(depth()) + ")");
    return data_.col(j % depth());
  }

  Scalar operator()(Index i, Index j) const { return row(j)(i); }

  void push(const Eigen::Ref<const Row>& row) {
    if (row.size() != sites()) throw ValidationError("RollingField::push: row length != sites");
    ++newest_;
    data_.col(newest_ % depth()) = row;
  }

  /// Computes row newest+1 in place from row newest via fn(prev, next).
  template <class Fn>
  void advance(Fn&& fn) {
    if (newest_ < 0) throw WindowUnavailable("advance on an empty RollingField");
    auto prev = data_.col(newest_ % depth());
    auto next = data_.col((newest_ + 1) % depth());
    fn(std::as_const(prev), next);
    ++newest_;
  }

 private:
  Storage data_;
  Index newest_ = -1;
};

using RollingField = BasicRollingField<double>;

/// Full (nx x rows) field, mostly for synthetic test fields.
class DenseField {
 public:
  explicit DenseField(Matrix values) : values_(std::move(values)) {}
  Index sites() const { return values_.rows(); }
  bool resident(Index j) const { return j >= 0 && j < values_.cols(); }
  Matrix::ConstColXpr row(Index j) const {
    if (!resident(j)) throw WindowUnavailable("row " + std::to_string(j) + " out of range");
    return values_.col(j);
  }
  double operator()(Index i, Index j) const { return row(j)(i); }
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
};

// ---------------------------------------------------------------------------
// Seeding

struct NoiseSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t realization_index = 0;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for stream `stream` of realization `realization` under `master`.
/// Stream 0 is the lattice noise; stream k >= 1 is point selection for window k-1.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t realization,
                                    std::uint64_t stream = 0) {
  return mix64(mix64(master) ^ mix64(realization + 0x632BE59BD9B4E019ULL) ^
               mix64(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

inline std::uint64_t stream_seed(const NoiseSpec& noise) {
  return derive_seed(noise.master_seed, noise.realization_index, 0);
}

// ---------------------------------------------------------------------------
// Deterministic companion

/// Zero-noise trajectory computed once per grid. Rows are kept every `stride`
/// steps (stride 1 keeps all rows); other rows are recomputed from the nearest
/// earlier checkpoint with the same stepping rule, so every returned row equals
/// a fresh re-simulation bit for bit.
class DeterministicTrajectory {
 public:
  DeterministicTrajectory(const GridConfig& cfg, Index stride);

  const GridConfig& grid() const { return cfg_; }
  Index stride() const { return stride_; }
  Index sites() const { return cfg_.nx; }
  bool resident(Index j) const { return j >= 0 && j <= cfg_.nt; }
  Vector row(Index j) const;

  /// Sequential reader: rows j, j+1, ... cost one step each.
  class Cursor {
   public:
    explicit Cursor(const DeterministicTrajectory& traj);
    const Vector& seek(Index j);
    Index index() const { return index_; }

   private:
    const DeterministicTrajectory* traj_;
    EulerMaruyama stepper_;
    Vector current_, scratch_, zeros_;
    Index index_ = -1;
  };

 private:
  friend class Cursor;
  GridConfig cfg_;
  Index stride_;
  Matrix checkpoints_;  // column c holds row c*stride
};

/// Builds the deterministic trajectory, keeping every row unless that would exceed
/// `memory_budget_bytes`, in which case the smallest fitting checkpoint stride is used.
std::shared_ptr<const DeterministicTrajectory> solve_deterministic(
    const GridConfig& cfg, std::size_t memory_budget_bytes = std::size_t(768) << 20);

// ---------------------------------------------------------------------------
// Streaming simulation

struct StreamSummary {
  double min_value = 0.0;
  double max_value = 0.0;
  std::int64_t steps = 0;
  bool operator==(const StreamSummary&) const = default;
};

using StreamObserver = std::function<void(Index, const RollingField&)>;

/// Runs one realization from row 0 to row nt, calling `observer` after row 0 and
/// after every step. Min/max are taken over all rows including boundaries.
StreamSummary simulate_stream(const GridConfig& cfg, const SigmaModel& model,
                              const NoiseSpec& noise, Index depth,
                              const StreamObserver& observer = {});

/// Observer writing `time_index,x_index,value` rows for every `time_stride`-th row.
class SnapshotWriter {
 public:
  SnapshotWriter(std::ostream& out, Index time_stride, Index space_stride = 1);
  void operator()(Index j, const RollingField& field);

 private:
  std::ostream* out_;
  Index time_stride_;
  Index space_stride_;
};

}  // namespace she
