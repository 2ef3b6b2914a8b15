#include "she/lattice.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

namespace she {

Vector initial_row(const GridConfig& cfg) {
  Vector row = Vector::Constant(cfg.nx, cfg.u0);
  row(0) = 0.0;
  row(cfg.nx - 1) = 0.0;
  return row;
}

// ---------------------------------------------------------------------------

DeterministicTrajectory::DeterministicTrajectory(const GridConfig& cfg, Index stride)
    : cfg_(cfg), stride_(stride) {
  cfg_.validate();
  if (stride_ < 1) throw ValidationError("checkpoint stride must be >= 1");
  const Index n_checkpoints = cfg_.nt / stride_ + 1;
  checkpoints_.resize(cfg_.nx, n_checkpoints);

  EulerMaruyama stepper(cfg_, SigmaModel(SigmaKind::Zero));
  const Vector zeros = Vector::Zero(cfg_.nx);
  Vector current = initial_row(cfg_);
  Vector next(cfg_.nx);
  checkpoints_.col(0) = current;
  for (Index j = 1; j <= cfg_.nt; ++j) {
    stepper.step(current, zeros, next, j);
    current.swap(next);
    if (j % stride_ == 0) checkpoints_.col(j / stride_) = current;
  }
}

Vector DeterministicTrajectory::row(Index j) const {
  if (!resident(j)) throw WindowUnavailable("deterministic row " + std::to_string(j) + " out of range");
  if (j % stride_ == 0) return checkpoints_.col(j / stride_);
  Cursor c(*this);
  return c.seek(j);
}

DeterministicTrajectory::Cursor::Cursor(const DeterministicTrajectory& traj)
    : traj_(&traj),
      stepper_(traj.cfg_, SigmaModel(SigmaKind::Zero)),
      current_(traj.cfg_.nx),
      scratch_(traj.cfg_.nx),
      zeros_(Vector::Zero(traj.cfg_.nx)) {}

const Vector& DeterministicTrajectory::Cursor::seek(Index j) {
  if (!traj_->resident(j))
    throw WindowUnavailable("deterministic row " + std::to_string(j) + " out of range");
  const Index stride = traj_->stride_;
  if (j % stride == 0) {
    current_ = traj_->checkpoints_.col(j / stride);
    index_ = j;
    return current_;
  }
  if (index_ < 0 || j < index_ || j - index_ > stride) {
    const Index base = (j / stride) * stride;
    current_ = traj_->checkpoints_.col(base / stride);
    index_ = base;
  }
  while (index_ < j) {
    stepper_.step(current_, zeros_, scratch_, index_ + 1);
    current_.swap(scratch_);
    ++index_;
  }
  return current_;
}

std::shared_ptr<const DeterministicTrajectory> solve_deterministic(const GridConfig& cfg,
                                                                   std::size_t memory_budget_bytes) {
  cfg.validate();
  const auto row_bytes = static_cast<std::size_t>(cfg.nx) * sizeof(double);
  const auto rows = static_cast<std::size_t>(cfg.rows());
  std::size_t fit = std::max<std::size_t>(1, memory_budget_bytes / row_bytes);
  Index stride = 1;
  while (rows / static_cast<std::size_t>(stride) + 1 > fit) stride *= 2;
  return std::make_shared<const DeterministicTrajectory>(cfg, stride);
}

// ---------------------------------------------------------------------------

StreamSummary simulate_stream(const GridConfig& cfg, const SigmaModel& model,
                              const NoiseSpec& noise, Index depth, const StreamObserver& observer) {
  cfg.validate();
  RollingField field(cfg.nx, std::max<Index>(depth, 2));
  EulerMaruyama stepper(cfg, model);
  std::mt19937_64 rng(stream_seed(noise));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector gauss = Vector::Zero(cfg.nx);

  field.push(initial_row(cfg));
  StreamSummary summary;
  summary.min_value = field.row(0).minCoeff();
  summary.max_value = field.row(0).maxCoeff();
  if (observer) observer(0, field);

  for (Index j = 1; j <= cfg.nt; ++j) {
    for (Index i = 1; i + 1 < cfg.nx; ++i) gauss(i) = normal(rng);
    field.advance([&](const auto& prev, auto& next) { stepper.step(prev, gauss, next, j); });
    const auto cur = field.row(j);
    summary.min_value = std::min(summary.min_value, cur.minCoeff());
    summary.max_value = std::max(summary.max_value, cur.maxCoeff());
    summary.steps = j;
    if (observer) observer(j, field);
  }
  return summary;
}

SnapshotWriter::SnapshotWriter(std::ostream& out, Index time_stride, Index space_stride)
    : out_(&out), time_stride_(time_stride), space_stride_(space_stride) {
  if (time_stride_ < 1 || space_stride_ < 1) throw ValidationError("snapshot strides must be >= 1");
  *out_ << "time_index,x_index,value\n";
}

void SnapshotWriter::operator()(Index j, const RollingField& field) {
  if (j % time_stride_ != 0) return;
  const auto row = field.row(j);
  char buf[64];
  for (Index i = 0; i < row.size(); i += space_stride_) {
    std::snprintf(buf, sizeof buf, "%.17g", row(i));
    *out_ << j << ',' << i << ',' << buf << '\n';
  }
}

}  // namespace she
