#include "mtrack/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mtrack/errors.hpp"
#include "mtrack/parallel.hpp"

namespace mtrack {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

void require_subsonic(const Trajectory& traj, double c0) {
  if (!(c0 > 0.0)) throw InvalidArgument("c0 must be positive");
  if (!(traj.v_max() < c0)) {
    std::ostringstream msg;
    msg << "trajectory '" << traj.id() << "' has v_max = " << traj.v_max() << " >= c0 = " << c0;
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

double SourceSignal::operator()(double t) const {
  if (t <= 0.0 || t > stop_time) return 0.0;
  return std::sin(omega0 * t);
}

namespace {

void require_solver_params(const RetardedSolveParams& params) {
  if (!(params.tolerance > 0.0) || params.max_iterations < 1)
    throw InvalidArgument("retarded time: tolerance must be positive and max_iterations >= 1");
}

}  // namespace

std::vector<double> retarded_time_iterates(const Point3& x, const Trajectory& traj, double t, double c0,
                                           const RetardedSolveParams& params) {
  require_subsonic(traj, c0);
  require_solver_params(params);
  std::vector<double> iterates{t};
  double tau = t;
  for (int k = 0; k < params.max_iterations; ++k) {
    const double next = t - distance(x, traj.position_clamped(tau)) / c0;
    iterates.push_back(next);
    if (std::abs(next - tau) < params.tolerance) return iterates;
    tau = next;
  }
  std::ostringstream msg;
  msg << "retarded time did not converge in " << params.max_iterations << " iterations at t = " << t;
  throw ConvergenceError(msg.str());
}

double retarded_time(const Point3& x, const Trajectory& traj, double t, double c0,
                     const RetardedSolveParams& params) {
  require_subsonic(traj, c0);
  require_solver_params(params);
  double tau = t;
  for (int k = 0; k < params.max_iterations; ++k) {
    const double next = t - distance(x, traj.position_clamped(tau)) / c0;
    if (std::abs(next - tau) < params.tolerance) return next;
    tau = next;
  }
  std::ostringstream msg;
  msg << "retarded time did not converge in " << params.max_iterations << " iterations at t = " << t;
  throw ConvergenceError(msg.str());
}

double retarded_potential(const Point3& x, double t, const Trajectory& traj, double c0, const SourceSignal& signal,
                          PotentialMode mode, const RetardedSolveParams& params) {
  const double tau = retarded_time(x, traj, t, c0, params);
  if (tau <= 0.0 || tau > std::min(signal.stop_time, traj.terminal_time())) return 0.0;

  const TrajectoryState s = traj.eval_clamped(tau);
  const Point3 d = x - s.position;
  const double r = norm(d);
  if (r == 0.0) throw SingularPoint("retarded potential evaluated at the source point");

  const Point3 dir = mode == PotentialMode::NormalizedDirection ? d / r : d;
  const double denom = 1.0 - dot(dir, s.velocity) / c0;
  if (!(denom > 0.0)) {
    std::ostringstream msg;
    msg << "retarded potential: non-positive Doppler denominator " << denom << " at t = " << t;
    throw SingularPoint(msg.str());
  }
  return signal(tau) / (kFourPi * r * denom);
}

double approx_field(const Point3& x, double t, const Trajectory& traj, double omega0) {
  const double r = distance(x, traj.position(t));
  if (r == 0.0) throw SingularPoint("approximate field evaluated at the source point");
  return std::sin(omega0 * t) / (kFourPi * r);
}

double retardation_ratio(const Point3& x, double t, const Trajectory& traj, double c0, double omega0) {
  const double tau = retarded_time(x, traj, t, c0);
  return omega0 * distance(x, traj.position_clamped(tau)) / (2.0 * std::numbers::pi * c0);
}

WaveRecord synthesize_record(const Trajectory& traj, const ReceiverArray& receivers, const TimeGrid& grid,
                             const MediumSpec& medium, const SourceSignal& signal, PotentialMode mode) {
  medium.validate();
  if (medium.inclusion)
    throw InvalidArgument("synthesize_record: homogeneous path only; use the inhomogeneous solver");
  require_subsonic(traj, medium.c0);

  RecordMeta meta;
  meta.omega0 = signal.omega0;
  meta.c0 = medium.c0;
  meta.trajectory_id = traj.id();
  meta.forward_method = "retarded";
  WaveRecord record(receivers, grid, meta);

  const auto times = grid.times();
  parallel_for(receivers.size(), [&](std::size_t m) {
    auto row = record.row(m);
    for (std::size_t j = 0; j < times.size(); ++j) {
      try {
        row[j] = retarded_potential(receivers.positions[m], times[j], traj, medium.c0, signal, mode);
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "synthesis failed at receiver " << m << ", step " << j + 1 << ": " << e.what();
        throw ConvergenceError(msg.str());
      }
    }
  });
  return record;
}

WaveRecord synthesize_approx_record(const Trajectory& traj, const ReceiverArray& receivers, const TimeGrid& grid,
                                    double c0, double omega0) {
  RecordMeta meta;
  meta.omega0 = omega0;
  meta.c0 = c0;
  meta.trajectory_id = traj.id();
  meta.forward_method = "static-approximation";
  WaveRecord record(receivers, grid, meta);
  const auto times = grid.times();
  for (std::size_t m = 0; m < receivers.size(); ++m)
    for (std::size_t j = 0; j < times.size(); ++j)
      record.at(m, j + 1) = approx_field(receivers.positions[m], times[j], traj, omega0);
  return record;
}

double noise_draw(std::uint64_t seed, std::size_t m, std::size_t step) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(m), hi(m), lo(step), hi(step)};
  std::mt19937_64 gen(seq);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  return dist(gen);
}

WaveRecord add_noise(const WaveRecord& record, double eps, std::uint64_t seed) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidArgument("noise level must be non-negative");
  WaveRecord out = record;
  out.meta().noise = eps;
  out.meta().seed = seed;
  if (eps == 0.0) return out;
  parallel_for(out.n_receivers(), [&](std::size_t m) {
    auto row = out.row(m);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] *= 1.0 + eps * noise_draw(seed, m, j + 1);
  });
  return out;
}

}  // namespace mtrack
