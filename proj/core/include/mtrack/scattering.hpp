#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mtrack/model.hpp"
#include "mtrack/trajectory.hpp"

namespace mtrack {

using cplx = std::complex<double>;

/// Voxelization of the inclusion: a regular n1 x n2 x n3 grid of cells that
/// tile the cuboid exactly, each carrying the contrast
/// gamma = omega0^2 (c^-2 - c0^-2) of its centre.
struct VoxelGrid {
  std::vector<Point3> centers;  // flat index (i1 * n2 + i2) * n3 + i3
  std::vector<double> contrast;  // 1/m^2
  double cell_volume{};          // m^3
  Point3 spacing;
  std::size_t n[3]{};

  std::size_t size() const { return centers.size(); }
  /// Radius of the ball with the cell's volume.
  double equivalent_radius() const;
};

/// Voxelizes the medium's inclusion with `resolution` cells per axis.
VoxelGrid voxelize(const MediumSpec& medium, double omega0, std::size_t resolution);

struct HelmholtzSolution {
  std::vector<cplx> incident;  // Phi_k0(y_q, z0)
  std::vector<cplx> total;     // u_hat(y_q)
  double k0{};
  double norm_bound{};                 // row-sum bound on ||K||
  std::vector<double> residual_history;  // relative update norm per Neumann step
};

/// Outgoing Helmholtz fundamental solution exp(i k0 r) / (4 pi r).
cplx helmholtz_fundamental(const Point3& x, const Point3& y, double k0);

/// Integral of the fundamental solution over a ball of radius a centred on
/// its singularity: int_0^a r exp(i k r) dr.
cplx ball_self_integral(double a, double k0);

/// omega0^2 |c0^-2 - c^-2| over the inclusion, 0 without one.
double check_smallness(const MediumSpec& medium, double omega0);

/// Discrete volume operator (K w)(y_p) = sum_q gamma_q w_q G(y_p, y_q), with
/// G = Phi dV off the diagonal and the ball self-integral on it. Applied as
/// a zero-padded FFT convolution since the voxel lattice is regular.
class VolumeOperator {
 public:
  VolumeOperator(const VoxelGrid& grid, double k0);
  ~VolumeOperator();
  VolumeOperator(VolumeOperator&&) noexcept;
  VolumeOperator& operator=(VolumeOperator&&) noexcept;

  void apply(std::span<const cplx> in, std::span<cplx> out) const;
  /// max_p sum_q |K_pq| bound (infinity norm).
  double norm_bound() const { return norm_bound_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double norm_bound_{};
};

/// Neumann series u_hat = sum_k K^k Phi(., z0), stopped when the relative
/// update falls below tol. Throws ConvergenceError when the row-sum bound on
/// ||K|| is >= 1 or the updates grow.
HelmholtzSolution solve_lippmann_schwinger(const Point3& z0, const VoxelGrid& grid, double k0, double tol = 1e-8);
HelmholtzSolution solve_lippmann_schwinger(const Point3& z0, const VoxelGrid& grid, const VolumeOperator& op,
                                           double k0, double tol = 1e-8);

/// ||(I - K) u_hat - Phi|| / ||Phi||.
double lippmann_schwinger_residual(const HelmholtzSolution& sol, const VoxelGrid& grid);

/// Phi(x, z0) + sum_q gamma_q u_hat_q Phi(x, y_q) dV for x outside the inclusion.
cplx eval_total_field(const HelmholtzSolution& sol, const VoxelGrid& grid, const Point3& z0, const Point3& x);

/// u(x_m, t_j) = sin(omega0 t_j) Re u_hat_{z0(t_j)}(x_m), one solve per step
/// with the source frozen at z0(t_j). Without an inclusion this is
/// sin(omega0 t_j) Re Phi(x_m, z0(t_j)).
WaveRecord synthesize_record_inhomogeneous(const Trajectory& traj, const ReceiverArray& receivers,
                                           const TimeGrid& grid, const MediumSpec& medium, double omega0,
                                           std::size_t resolution = 20, double tol = 1e-8);

}  // namespace mtrack
