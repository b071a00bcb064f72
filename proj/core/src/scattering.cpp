#include "mtrack/scattering.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "mtrack/errors.hpp"
#include "mtrack/parallel.hpp"

namespace mtrack {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

double l2(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  return std::sqrt(s);
}

}  // namespace

double VoxelGrid::equivalent_radius() const { return std::cbrt(3.0 * cell_volume / (4.0 * kPi)); }

VoxelGrid voxelize(const MediumSpec& medium, double omega0, std::size_t resolution) {
  medium.validate();
  if (!medium.inclusion) throw InvalidArgument("voxelize: medium has no inclusion");
  if (resolution < 1) throw InvalidArgument("voxelize: resolution must be positive");
  const Cuboid& box = *medium.inclusion;
  VoxelGrid g;
  g.n[0] = g.n[1] = g.n[2] = resolution;
  const auto r = static_cast<double>(resolution);
  g.spacing = {box.size.x1 / r, box.size.x2 / r, box.size.x3 / r};
  g.cell_volume = g.spacing.x1 * g.spacing.x2 * g.spacing.x3;
  const Point3 lo = box.center - 0.5 * box.size;
  const double gamma = omega0 * omega0 * (1.0 / (box.speed * box.speed) - 1.0 / (medium.c0 * medium.c0));
  g.centers.reserve(resolution * resolution * resolution);
  for (std::size_t i = 0; i < resolution; ++i)
    for (std::size_t j = 0; j < resolution; ++j)
      for (std::size_t k = 0; k < resolution; ++k)
        g.centers.push_back({lo.x1 + (static_cast<double>(i) + 0.5) * g.spacing.x1,
                             lo.x2 + (static_cast<double>(j) + 0.5) * g.spacing.x2,
                             lo.x3 + (static_cast<double>(k) + 0.5) * g.spacing.x3});
  g.contrast.assign(g.centers.size(), gamma);
  return g;
}

cplx helmholtz_fundamental(const Point3& x, const Point3& y, double k0) {
  const double r = distance(x, y);
  if (r == 0.0) throw SingularPoint("Helmholtz kernel evaluated at coincident points");
  return std::polar(1.0 / (4.0 * kPi * r), k0 * r);
}

cplx ball_self_integral(double a, double k0) {
  const double ka = k0 * a;
  if (std::abs(ka) < 0.5) {
    // sum_n (i k)^n a^(n+2) / (n! (n+2))
    cplx sum = 0.0;
    cplx term = a * a;  // (i k a)^n a^2 / n!
    for (int n = 0; n < 30; ++n) {
      sum += term / static_cast<double>(n + 2);
      term *= cplx(0.0, ka) / static_cast<double>(n + 1);
    }
    return sum;
  }
  const cplx ika(0.0, ka);
  return ((1.0 - ika) * std::exp(ika) - 1.0) / (k0 * k0);
}

double check_smallness(const MediumSpec& medium, double omega0) {
  if (!medium.inclusion) return 0.0;
  const double c = medium.inclusion->speed;
  return omega0 * omega0 * std::abs(1.0 / (medium.c0 * medium.c0) - 1.0 / (c * c));
}

struct VolumeOperator::Impl {
  std::size_t n[3]{};
  std::size_t m[3]{};  // padded sizes 2n
  std::vector<double> contrast;
  std::vector<cplx> kernel_hat;
  fftw_plan forward{};
  fftw_plan backward{};

  std::size_t padded_size() const { return m[0] * m[1] * m[2]; }

  ~Impl() {
    std::lock_guard lock(fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

VolumeOperator::VolumeOperator(const VoxelGrid& grid, double k0) : impl_(std::make_unique<Impl>()) {
  Impl& s = *impl_;
  for (int a = 0; a < 3; ++a) {
    s.n[a] = grid.n[a];
    s.m[a] = 2 * grid.n[a];
  }
  s.contrast = grid.contrast;
  const std::size_t total = s.padded_size();
  std::vector<cplx> kernel(total);

  const double self = std::abs(ball_self_integral(grid.equivalent_radius(), k0));
  double abs_sum = 0.0;
  auto offset = [](std::size_t idx, std::size_t m) {
    // wrapped index -> signed offset in (-m/2, m/2]
    return idx <= m / 2 ? static_cast<double>(idx) : static_cast<double>(idx) - static_cast<double>(m);
  };
  for (std::size_t i = 0; i < s.m[0]; ++i)
    for (std::size_t j = 0; j < s.m[1]; ++j)
      for (std::size_t k = 0; k < s.m[2]; ++k) {
        const double d1 = offset(i, s.m[0]), d2 = offset(j, s.m[1]), d3 = offset(k, s.m[2]);
        // offsets of magnitude n never occur between two cells of the grid
        if (std::abs(d1) >= static_cast<double>(s.n[0]) || std::abs(d2) >= static_cast<double>(s.n[1]) ||
            std::abs(d3) >= static_cast<double>(s.n[2]))
          continue;
        const std::size_t idx = (i * s.m[1] + j) * s.m[2] + k;
        if (i == 0 && j == 0 && k == 0) {
          kernel[idx] = ball_self_integral(grid.equivalent_radius(), k0);
        } else {
          const Point3 d{d1 * grid.spacing.x1, d2 * grid.spacing.x2, d3 * grid.spacing.x3};
          kernel[idx] = helmholtz_fundamental(d, {}, k0) * grid.cell_volume;
          abs_sum += std::abs(kernel[idx]);
        }
      }
  double max_gamma = 0.0;
  for (double g : grid.contrast) max_gamma = std::max(max_gamma, std::abs(g));
  norm_bound_ = max_gamma * (abs_sum + self);

  s.kernel_hat.resize(total);
  {
    std::lock_guard lock(fftw_planner_mutex());
    auto* buf = reinterpret_cast<fftw_complex*>(s.kernel_hat.data());
    const int dims[3] = {static_cast<int>(s.m[0]), static_cast<int>(s.m[1]), static_cast<int>(s.m[2])};
    s.forward = fftw_plan_dft(3, dims, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    s.backward = fftw_plan_dft(3, dims, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  std::copy(kernel.begin(), kernel.end(), s.kernel_hat.begin());
  auto* kh = reinterpret_cast<fftw_complex*>(s.kernel_hat.data());
  fftw_execute_dft(s.forward, kh, kh);
}

VolumeOperator::~VolumeOperator() = default;
VolumeOperator::VolumeOperator(VolumeOperator&&) noexcept = default;
VolumeOperator& VolumeOperator::operator=(VolumeOperator&&) noexcept = default;

void VolumeOperator::apply(std::span<const cplx> in, std::span<cplx> out) const {
  const Impl& s = *impl_;
  const std::size_t nvox = s.n[0] * s.n[1] * s.n[2];
  if (in.size() != nvox || out.size() != nvox) throw InvalidArgument("VolumeOperator: size mismatch");

  std::vector<cplx> work(s.padded_size(), 0.0);
  for (std::size_t i = 0; i < s.n[0]; ++i)
    for (std::size_t j = 0; j < s.n[1]; ++j)
      for (std::size_t k = 0; k < s.n[2]; ++k) {
        const std::size_t q = (i * s.n[1] + j) * s.n[2] + k;
        work[(i * s.m[1] + j) * s.m[2] + k] = s.contrast[q] * in[q];
      }
  auto* w = reinterpret_cast<fftw_complex*>(work.data());
  fftw_execute_dft(s.forward, w, w);
  for (std::size_t p = 0; p < work.size(); ++p) work[p] *= s.kernel_hat[p];
  fftw_execute_dft(s.backward, w, w);
  const double scale = 1.0 / static_cast<double>(s.padded_size());
  for (std::size_t i = 0; i < s.n[0]; ++i)
    for (std::size_t j = 0; j < s.n[1]; ++j)
      for (std::size_t k = 0; k < s.n[2]; ++k)
        out[(i * s.n[1] + j) * s.n[2] + k] = work[(i * s.m[1] + j) * s.m[2] + k] * scale;
}

HelmholtzSolution solve_lippmann_schwinger(const Point3& z0, const VoxelGrid& grid, double k0, double tol) {
  const VolumeOperator op(grid, k0);
  return solve_lippmann_schwinger(z0, grid, op, k0, tol);
}

HelmholtzSolution solve_lippmann_schwinger(const Point3& z0, const VoxelGrid& grid, const VolumeOperator& op,
                                           double k0, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("Lippmann-Schwinger: tolerance must be positive");
  const Point3 half = 0.5 * Point3{grid.spacing.x1 * static_cast<double>(grid.n[0]),
                                   grid.spacing.x2 * static_cast<double>(grid.n[1]),
                                   grid.spacing.x3 * static_cast<double>(grid.n[2])};
  const Point3 lo = grid.centers.front() - 0.5 * grid.spacing;
  if (Cuboid{lo + half, 2.0 * half, 1.0}.contains(z0))
    throw InvalidArgument("Lippmann-Schwinger: source lies inside the inclusion");

  HelmholtzSolution sol;
  sol.k0 = k0;
  sol.norm_bound = op.norm_bound();
  if (!(sol.norm_bound < 1.0)) {
    std::ostringstream msg;
    msg << "Lippmann-Schwinger: operator norm bound " << sol.norm_bound << " >= 1; Neumann series not guaranteed";
    throw ConvergenceError(msg.str());
  }

  sol.incident.resize(grid.size());
  for (std::size_t q = 0; q < grid.size(); ++q) sol.incident[q] = helmholtz_fundamental(grid.centers[q], z0, k0);
  sol.total = sol.incident;

  std::vector<cplx> next(grid.size());
  for (int iter = 0; iter < 200; ++iter) {
    op.apply(sol.total, next);
    double diff = 0.0;
    for (std::size_t q = 0; q < next.size(); ++q) {
      next[q] += sol.incident[q];
      diff += std::norm(next[q] - sol.total[q]);
    }
    const double update = std::sqrt(diff) / l2(next);
    sol.total.swap(next);
    const bool growing = !sol.residual_history.empty() && update > sol.residual_history.back() && update > 1e-12;
    sol.residual_history.push_back(update);
    if (update < tol) return sol;
    if (growing) throw ConvergenceError("Lippmann-Schwinger: Neumann updates grow; contrast too large");
  }
  throw ConvergenceError("Lippmann-Schwinger: no convergence in 200 Neumann steps");
}

double lippmann_schwinger_residual(const HelmholtzSolution& sol, const VoxelGrid& grid) {
  const VolumeOperator op(grid, sol.k0);
  std::vector<cplx> ku(grid.size());
  op.apply(sol.total, ku);
  double num = 0.0;
  for (std::size_t q = 0; q < ku.size(); ++q) num += std::norm(sol.total[q] - ku[q] - sol.incident[q]);
  return std::sqrt(num) / l2(sol.incident);
}

namespace {

void require_outside(const VoxelGrid& grid, const Point3& x) {
  const Point3 lo = grid.centers.front() - 0.5 * grid.spacing;
  const Point3 size{grid.spacing.x1 * static_cast<double>(grid.n[0]), grid.spacing.x2 * static_cast<double>(grid.n[1]),
                    grid.spacing.x3 * static_cast<double>(grid.n[2])};
  if (Cuboid{lo + 0.5 * size, size, 1.0}.contains(x))
    throw InvalidArgument("total field: evaluation point inside the inclusion");
}

}  // namespace

cplx eval_total_field(const HelmholtzSolution& sol, const VoxelGrid& grid, const Point3& z0, const Point3& x) {
  require_outside(grid, x);
  cplx scattered = 0.0;
  for (std::size_t q = 0; q < grid.size(); ++q)
    scattered += grid.contrast[q] * sol.total[q] * helmholtz_fundamental(x, grid.centers[q], sol.k0);
  return helmholtz_fundamental(x, z0, sol.k0) + scattered * grid.cell_volume;
}

WaveRecord synthesize_record_inhomogeneous(const Trajectory& traj, const ReceiverArray& receivers,
                                           const TimeGrid& grid, const MediumSpec& medium, double omega0,
                                           std::size_t resolution, double tol) {
  medium.validate();
  const double k0 = omega0 / medium.c0;
  RecordMeta meta;
  meta.omega0 = omega0;
  meta.c0 = medium.c0;
  meta.trajectory_id = traj.id();
  meta.forward_method = "frequency-domain";
  meta.medium = medium;
  WaveRecord record(receivers, grid, meta);
  const auto times = grid.times();

  if (!medium.inclusion) {
    for (std::size_t m = 0; m < receivers.size(); ++m)
      for (std::size_t j = 0; j < times.size(); ++j)
        record.at(m, j + 1) = std::sin(omega0 * times[j]) *
                              helmholtz_fundamental(receivers.positions[m], traj.position(times[j]), k0).real();
    return record;
  }

  const VoxelGrid voxels = voxelize(medium, omega0, resolution);
  const VolumeOperator op(voxels, k0);
  for (const auto& x : receivers.positions) require_outside(voxels, x);

  // Receiver-to-voxel coupling gamma_q Phi(x_m, y_q) dV, reused for every step.
  const std::size_t nq = voxels.size();
  std::vector<cplx> coupling(receivers.size() * nq);
  parallel_for(receivers.size(), [&](std::size_t m) {
    for (std::size_t q = 0; q < nq; ++q)
      coupling[m * nq + q] = voxels.contrast[q] * voxels.cell_volume *
                             helmholtz_fundamental(receivers.positions[m], voxels.centers[q], k0);
  });

  parallel_for(times.size(), [&](std::size_t j) {
    const double t = times[j];
    const Point3 z0 = traj.position(t);
    HelmholtzSolution sol;
    try {
      sol = solve_lippmann_schwinger(z0, voxels, op, k0, tol);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "inhomogeneous synthesis failed at step " << j + 1 << ": " << e.what();
      throw ConvergenceError(msg.str());
    }
    for (std::size_t m = 0; m < receivers.size(); ++m) {
      cplx scattered = 0.0;
      const cplx* row = coupling.data() + m * nq;
      for (std::size_t q = 0; q < nq; ++q) scattered += row[q] * sol.total[q];
      const cplx u_hat = helmholtz_fundamental(receivers.positions[m], z0, k0) + scattered;
      record.at(m, j + 1) = std::sin(omega0 * t) * u_hat.real();
    }
  });
  return record;
}

}  // namespace mtrack
