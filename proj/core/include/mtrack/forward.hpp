#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mtrack/model.hpp"
#include "mtrack/trajectory.hpp"

namespace mtrack {

struct RetardedSolveParams {
  double tolerance{1e-10};  // s
  int max_iterations{200};
};

/// Denominator of the moving-source potential 1 - <d, v>/c0.
///   NormalizedDirection: d is the unit vector from source to receiver.
///   UnnormalizedSeparation: d = x - z0(tau) as is. Not dimensionless; breaks
///   down once |d| |v| >= c0.
enum class PotentialMode { NormalizedDirection, UnnormalizedSeparation };

/// Causal time-harmonic emission lambda(t) = sin(omega0 t) for 0 < t <= stop_time.
struct SourceSignal {
  double omega0{1.0};
  double stop_time{std::numeric_limits<double>::infinity()};

  double operator()(double t) const;
};

/// Emission time tau solving tau = t - ||x - z0(tau)|| / c0.
///
/// Fixed-point iteration from tau = t; a contraction with factor v_max/c0.
/// Positions outside (0, T] are clamped to the path endpoints. A solution
/// tau <= 0 is returned unchanged; causality is applied by the caller.
double retarded_time(const Point3& x, const Trajectory& traj, double t, double c0,
                     const RetardedSolveParams& params = {});

/// Same iteration, returning every iterate tau_0 = t, tau_1, ...
std::vector<double> retarded_time_iterates(const Point3& x, const Trajectory& traj, double t, double c0,
                                           const RetardedSolveParams& params = {});

/// Field of the moving emitter in the homogeneous medium.
///
/// u0 = lambda(tau) / (4 pi ||x - z0(tau)|| (1 - <d, v(tau)>/c0)), zero for
/// tau <= 0 and for tau past the emission stop.
double retarded_potential(const Point3& x, double t, const Trajectory& traj, double c0, const SourceSignal& signal,
                          PotentialMode mode = PotentialMode::NormalizedDirection,
                          const RetardedSolveParams& params = {});

/// Static-kernel approximation sin(omega0 t) / (4 pi ||x - z0(t)||).
double approx_field(const Point3& x, double t, const Trajectory& traj, double omega0);

/// omega0 ||x - z0(tau)|| / (2 pi c0): the small parameter of the static approximation.
double retardation_ratio(const Point3& x, double t, const Trajectory& traj, double c0, double omega0);

/// values(m, j) = retarded_potential(x_m, t_j). The medium must be homogeneous.
WaveRecord synthesize_record(const Trajectory& traj, const ReceiverArray& receivers, const TimeGrid& grid,
                             const MediumSpec& medium, const SourceSignal& signal,
                             PotentialMode mode = PotentialMode::NormalizedDirection);

/// Record whose entries are approx_field(x_m, t_j); noiseless model data.
WaveRecord synthesize_approx_record(const Trajectory& traj, const ReceiverArray& receivers, const TimeGrid& grid,
                                    double c0, double omega0);

/// Uniform(-1, 1) draw for cell (m, step) of the stream keyed by seed.
/// Counter-based: each cell has its own generator, so draws do not depend on
/// evaluation order.
double noise_draw(std::uint64_t seed, std::size_t m, std::size_t step);

/// u <- u (1 + eps r), r ~ Uniform(-1, 1) per entry.
WaveRecord add_noise(const WaveRecord& record, double eps, std::uint64_t seed);

}  // namespace mtrack
