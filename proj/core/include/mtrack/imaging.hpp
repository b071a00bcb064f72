#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtrack/model.hpp"

namespace mtrack {

struct IndicatorParams {
  double omega0{1.0};
  /// Sampling points closer than this to any receiver are undefined.
  double exclusion_radius{1e-3};
};

struct TrackingOptions {
  /// Widen every search ball by one lattice cell diagonal. Without it a ball
  /// narrower than a cell only holds its own centre and the search freezes.
  bool lattice_slack{true};
};

/// phi(x, t; z) = sin(omega0 t) / (4 pi ||x - z||)
double test_function(const Point3& x, double t, const Point3& z, double omega0);

/// Normalized correlation of one record column against the test function.
///
/// I(z) = |sum_m u_m phi_m ds_m| / (sqrt(sum_m u_m^2 ds_m) sqrt(sum_m phi_m^2 ds_m)).
/// The common factor sin(omega0 t)/(4 pi) of phi cancels; it only decides
/// whether the column is defined at all.
class ColumnIndicator {
 public:
  ColumnIndicator(const WaveRecord& record, std::size_t step, const IndicatorParams& params);
  ColumnIndicator(const ReceiverArray& receivers, std::span<const double> column, double t,
                  const IndicatorParams& params);

  double t() const { return t_; }
  double column_norm() const { return column_norm_; }
  /// Column not identically zero and sin(omega0 t) != 0.
  bool defined() const { return column_norm_ > 0.0 && test_scale_ != 0.0; }

  /// Throws UndefinedIndicator for an undefined column or an excluded z.
  double value(const Point3& z) const;
  /// NaN instead of throwing.
  double value_or_nan(const Point3& z) const;

 private:
  const ReceiverArray* receivers_;
  IndicatorParams params_;
  double t_{};
  double test_scale_{};
  double column_norm_{};
  std::vector<double> weighted_;  // u_m ds_m
};

/// All columns of a record, laid out for evaluating every step at one z.
class IndicatorField {
 public:
  IndicatorField(const WaveRecord& record, const IndicatorParams& params);

  std::size_t n_steps() const { return n_steps_; }
  double column_norm(std::size_t step) const { return column_norms_[step - 1]; }
  double max_column_norm() const { return max_norm_; }
  /// Columns skipped by reconstructions: norm below 1e-12 of the largest
  /// column norm, or sin(omega0 t_j) == 0.
  bool usable(std::size_t step) const;

  /// Indicator for every step at z (NaN for unusable steps); false if z is
  /// inside the exclusion radius of a receiver.
  bool values_at(const Point3& z, std::span<double> out) const;

 private:
  const ReceiverArray* receivers_;
  IndicatorParams params_;
  std::size_t n_steps_;
  std::vector<double> weighted_;  // [m * n_steps + j] = u_mj ds_m
  std::vector<double> column_norms_;
  std::vector<double> test_scale_;
  double max_norm_{};
};

/// Indicator I(t_step, z) of a record.
double indicator(const WaveRecord& record, std::size_t step, const Point3& z, const IndicatorParams& params);

struct ArgmaxResult {
  Point3 z;
  double value{};
  std::size_t flat_index{};
};

/// Lattice maximizer; ties go to the smallest lexicographic (x1, x2, x3).
ArgmaxResult grid_argmax(const WaveRecord& record, std::size_t step, const SamplingMesh& mesh,
                         const IndicatorParams& params);
ArgmaxResult grid_argmax(const ColumnIndicator& column, const SamplingMesh& mesh);
/// Maximizer over the given flat indices (visited in the given order).
ArgmaxResult argmax_over(const ColumnIndicator& column, const SamplingMesh& mesh, std::span<const std::size_t> flat);

/// One global grid argmax per usable step.
ReconResult reconstruct_global(const WaveRecord& record, const SamplingMesh& mesh, const IndicatorParams& params);

/// Time-marching search: global at the first usable step, then inside the
/// ball of radius v_max * dt (times the number of steps since the last
/// reconstructed point) around the previous point.
class SequentialTracker {
 public:
  SequentialTracker(const SamplingMesh& mesh, double v_max, double dt, TrackingOptions options = {});

  /// Processes the next column; returns the reconstructed point or nothing
  /// when the column is skipped.
  std::optional<ReconPoint> advance(const ColumnIndicator& column, std::size_t step);

  bool started() const { return last_.has_value(); }

 private:
  const SamplingMesh* mesh_;
  double v_max_;
  double dt_;
  TrackingOptions options_;
  double running_max_norm_{};
  std::optional<ReconPoint> last_;
};

ReconResult reconstruct_sequential(const WaveRecord& record, const SamplingMesh& mesh, double v_max,
                                   const IndicatorParams& params, TrackingOptions options = {});

/// Dichotomy visiting order: level 0 at step N_t; level i = 1..floor(log2 N_t)
/// has slots n = 1..2^(i-1) at step floor((2n-1) N_t / 2^i), each searched in
/// the ball of its parent (i-1, ceil(n/2)). Entry radius is
/// v_max * ceil(N_t / 2^(i+1)) * T / N_t. Repeated steps are dropped.
TuningSchedule parallel_schedule(std::size_t n_steps, double v_max, double terminal_time);

/// Executes the schedule level by level (slots of a level run concurrently),
/// then fills unvisited steps from their nearest visited neighbour with the
/// sequential rule (flagged `filled`).
ReconResult reconstruct_parallel(const WaveRecord& record, const SamplingMesh& mesh, double v_max,
                                 const IndicatorParams& params, TrackingOptions options = {});

ReconResult reconstruct(SearchMethod method, const WaveRecord& record, const SamplingMesh& mesh, double v_max,
                        const IndicatorParams& params, TrackingOptions options = {});

}  // namespace mtrack
