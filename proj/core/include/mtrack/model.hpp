#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtrack/geometry.hpp"

namespace mtrack {

/// Uniform recording grid t_j = j * T / N_t, j = 1..N_t.
///
/// Time indices ("steps") are 1-based everywhere in the public API, matching
/// the t_j convention. The last time is pinned to exactly T.
class TimeGrid {
 public:
  TimeGrid(double terminal_time, std::size_t n_steps);

  /// Grid with a prescribed step: T = n_steps * dt.
  static TimeGrid from_step(double dt, std::size_t n_steps);
  /// Grid with both T and dt given (as persisted); they must agree to 1e-9.
  static TimeGrid restore(double terminal_time, std::size_t n_steps, double dt);

  double terminal_time() const { return terminal_time_; }
  std::size_t size() const { return n_steps_; }
  double dt() const { return dt_; }

  /// t_step for step in [1, size()].
  double time(std::size_t step) const;
  std::vector<double> times() const;

 private:
  TimeGrid(double terminal_time, std::size_t n_steps, double dt);

  double terminal_time_;
  std::size_t n_steps_;
  double dt_;
};

/// Spherical patch: radius and open polar/azimuthal ranges (radians).
struct PatchParams {
  double radius{10.0};
  double theta_min{};
  double theta_max{};
  double phi_min{};
  double phi_max{};

  /// r^2 (phi_max - phi_min)(cos theta_min - cos theta_max)
  double area() const;
};

/// Limited-aperture receiver patch with per-receiver quadrature weights.
struct ReceiverArray {
  std::vector<Point3> positions;
  std::vector<double> weights;  // m^2
  PatchParams patch;
  std::size_t n_theta{};  // rows in the (theta, phi) layout
  std::size_t n_phi{};    // cells per full row

  std::size_t size() const { return positions.size(); }
  double total_weight() const;
};

/// Lays out n_receivers on a (theta, phi) product grid over the patch.
///
/// Rows follow theta; the row count is chosen so that the cell aspect ratio
/// best matches the patch, every row but the last holds n_phi receivers, and
/// the last row holds the remainder spread evenly over its band. Each
/// receiver sits at the centre of its cell and carries the exact cell area,
/// so the weights sum to the patch area.
ReceiverArray make_receiver_array(double radius, double theta_min, double theta_max, double phi_min,
                                  double phi_max, std::size_t n_receivers);

/// Axis-aligned cuboid with its interior wave speed.
struct Cuboid {
  Point3 center;
  Point3 size;
  double speed{};  // m/s

  bool contains(const Point3& p) const;
};

struct MediumSpec {
  double c0{330.0};
  std::optional<Cuboid> inclusion;

  void validate() const;
};

/// Regular lattice over the bounding box [lo, hi], inclusive of both corners.
class SamplingMesh {
 public:
  SamplingMesh(Point3 lo, Point3 hi, std::size_t n1, std::size_t n2, std::size_t n3);
  /// Cube [-half_width, half_width]^3 with n points per axis.
  static SamplingMesh cube(double half_width, std::size_t n);

  std::size_t n1() const { return n_[0]; }
  std::size_t n2() const { return n_[1]; }
  std::size_t n3() const { return n_[2]; }
  std::size_t size() const { return n_[0] * n_[1] * n_[2]; }
  const Point3& lo() const { return lo_; }
  const Point3& hi() const { return hi_; }
  Point3 spacing() const { return h_; }
  /// Largest axis spacing ("one cell" in distance criteria).
  double cell_size() const;
  double cell_diagonal() const;

  /// Flat index = (i1 * n2 + i2) * n3 + i3; increasing flat index is
  /// increasing lexicographic (x1, x2, x3) order.
  Point3 point(std::size_t flat) const;
  Point3 point(std::size_t i1, std::size_t i2, std::size_t i3) const;
  std::size_t flat_index(std::size_t i1, std::size_t i2, std::size_t i3) const {
    return (i1 * n_[1] + i2) * n_[2] + i3;
  }
  bool contains(const Point3& p) const;

  /// Flat indices of lattice points with ||p - center|| <= radius, ascending.
  std::vector<std::size_t> ball(const Point3& center, double radius) const;

 private:
  Point3 lo_;
  Point3 hi_;
  Point3 h_;
  std::size_t n_[3];
};

struct RecordMeta {
  double omega0{1.0};
  double c0{330.0};
  double noise{0.0};
  std::uint64_t seed{0};
  std::string trajectory_id;
  std::string forward_method;  // "retarded" | "frequency-domain"
  std::optional<MediumSpec> medium;
};

/// N_m x N_t matrix of field samples u(x_m, t_j), row-major by receiver.
class WaveRecord {
 public:
  WaveRecord(ReceiverArray receivers, TimeGrid grid, RecordMeta meta);

  std::size_t n_receivers() const { return receivers_.size(); }
  std::size_t n_steps() const { return grid_.size(); }
  const ReceiverArray& receivers() const { return receivers_; }
  const TimeGrid& grid() const { return grid_; }
  const RecordMeta& meta() const { return meta_; }
  RecordMeta& meta() { return meta_; }

  /// m is 0-based, step is 1-based.
  double& at(std::size_t m, std::size_t step) { return values_[m * grid_.size() + step - 1]; }
  double at(std::size_t m, std::size_t step) const { return values_[m * grid_.size() + step - 1]; }
  std::span<double> row(std::size_t m) { return {values_.data() + m * grid_.size(), grid_.size()}; }
  std::span<const double> row(std::size_t m) const { return {values_.data() + m * grid_.size(), grid_.size()}; }
  std::vector<double> column(std::size_t step) const;
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  void validate() const;

 private:
  ReceiverArray receivers_;
  TimeGrid grid_;
  RecordMeta meta_;
  std::vector<double> values_;
};

enum class SearchMethod { Global, Sequential, Parallel };

std::string to_string(SearchMethod m);
SearchMethod parse_search_method(const std::string& s);

struct ReconPoint {
  std::size_t step{};  // 1-based
  double t{};
  Point3 z;
  double indicator{};
  bool filled{false};  // parallel tuning: step not on the schedule, filled sequentially
};

struct TuningEntry {
  std::size_t level{};
  std::size_t slot{};    // 1-based within the level
  std::size_t step{};    // 1-based time index
  double radius{};       // radius of the ball this entry hands to its children, m
  std::ptrdiff_t parent{-1};  // index into the schedule, -1 for the root
};

struct TuningSchedule {
  std::vector<TuningEntry> entries;  // visiting order
  std::size_t levels{};
  std::vector<std::size_t> unvisited;  // steps never reached by the formulas
};

/// Reconstructed discrete trajectory.
struct ReconResult {
  SearchMethod method{SearchMethod::Global};
  TimeGrid grid{1.0, 1};
  std::vector<ReconPoint> points;   // ascending step
  std::vector<std::size_t> skipped;  // steps whose indicator was undefined
  std::optional<TuningSchedule> schedule;
};

}  // namespace mtrack
