#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtrack/model.hpp"
#include "mtrack/trajectory.hpp"

namespace mtrack {

struct TimedPoint {
  double t{};
  Point3 z;
};

/// z(t) = a0 + sum_{n=1..P} (a_n cos(n s) + b_n sin(n s)),
/// s = (t - time_shift) * time_scale, fitted on t - time_shift in (0, span].
struct FourierCurve {
  std::size_t order{};
  Point3 a0;
  std::vector<Point3> a;  // a[n-1] = a_n
  std::vector<Point3> b;
  double span{};
  double time_shift{};
  double time_scale{1.0};

  Point3 eval(double t) const;
};

/// Riemann-sum coefficients over the given nodes, with local parameters
/// s_j = (t_j - time_shift) * time_scale:
///   a0 = (1/N) sum z_j,  a_n = (2/N) sum z_j cos(n s_j),  b_n = (2/N) sum z_j sin(n s_j).
/// a0 is accumulated relative to the first node, so constant input is
/// reproduced exactly.
FourierCurve fourier_fit(std::span<const TimedPoint> points, double span, std::size_t order, double time_shift = 0.0,
                         double time_scale = 1.0);

/// sum_j ||z(t_j) - z_j||^2 on the fit's nodes.
double fit_residual(const FourierCurve& curve, std::span<const TimedPoint> points);

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin{};
  std::size_t end{};

  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

/// Splits where a consecutive distance exceeds factor times the mean
/// consecutive distance. Fewer than two points give one range. When there
/// is more than one range, single-point ranges are gap points and dropped.
std::vector<IndexRange> segment_gaps(std::span<const TimedPoint> points, double factor = 3.0);

struct SmoothSegment {
  IndexRange range;
  std::size_t requested_order{};
  bool order_reduced{};  // fewer than 2P+1 points: order lowered to floor((count-1)/2)
  FourierCurve curve;
  double residual_ss{};   // sum of squared residuals on the segment's nodes
  double residual_rms{};  // sqrt(residual_ss / count)
};

struct SegmentSet {
  std::vector<TimedPoint> points;  // one per step after filling skipped steps
  std::vector<SmoothSegment> segments;
};

struct SmoothOptions {
  std::size_t order{3};
  bool segmented{false};
  double gap_factor{3.0};
};

/// Fills skipped steps by linear interpolation in time (held constant past
/// either end), then fits one curve per segment. Each segment of `count`
/// steps is shifted onto (0, count * dt]. When the points split into several
/// segments, each is also stretched so its span covers (0, 2 pi]. Without
/// segmentation the whole record is one segment on its own time axis.
SegmentSet smooth(const ReconResult& result, const SmoothOptions& options = {});

/// Fitting on explicit points, which must be equally spaced in time with step dt.
SegmentSet smooth_points(std::vector<TimedPoint> points, double dt, const SmoothOptions& options = {});

/// Reconstructed points as (t, z), skipped steps omitted.
std::vector<TimedPoint> timed_points(const ReconResult& result);

struct TrajectoryMetrics {
  std::vector<double> per_step;  // ||z_j - z0(t_j)|| for each reconstructed point
  double mean{};
  double max{};
  double cell_size{};
  double within_1_cell{};  // fraction of points within one cell
  double within_2_cells{};
  bool has_hausdorff{false};
  double hausdorff{};  // smoothed samples vs true samples, symmetric
};

/// Fraction of `per_step` distances <= k * cell.
double fraction_within(std::span<const double> distances, double k, double cell);

TrajectoryMetrics trajectory_error(const ReconResult& result, const Trajectory& truth, double cell_size,
                                   const SegmentSet* smoothed = nullptr);

/// Symmetric Hausdorff distance between two finite point sets.
double hausdorff_distance(std::span<const Point3> a, std::span<const Point3> b);

}  // namespace mtrack
