#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtrack/geometry.hpp"

namespace mtrack {

struct TrajectoryState {
  Point3 position;
  Point3 velocity;
};

/// Emitter path z0(t) on the time domain (0, T].
///
/// Analytic paths carry closed-form position and velocity; sampled paths are
/// piecewise linear through time-stamped knots. At a non-differentiable
/// instant the velocity is the right-hand derivative (left-hand at T).
class Trajectory {
 public:
  enum class Kind { AnalyticBuiltin, Sampled };
  using Curve = std::function<Point3(double)>;

  static Trajectory analytic(std::string id, double terminal_time, Curve position, Curve velocity);
  /// Knot times must be strictly increasing, the first >= 0, the last > 0.
  /// Before the first knot the emitter rests at the first point.
  static Trajectory sampled(std::string id, std::vector<double> times, std::vector<Point3> points);
  static Trajectory constant(const Point3& p, double terminal_time);

  Kind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  double terminal_time() const { return terminal_time_; }
  /// Upper bound on the speed, m/s.
  double v_max() const { return v_max_; }
  Trajectory with_v_max(double v_max) const;
  Trajectory with_kind(Kind kind) const;

  /// Throws DomainError for t outside (0, T].
  TrajectoryState eval(double t) const;
  Point3 position(double t) const { return eval(t).position; }
  Point3 velocity(double t) const { return eval(t).velocity; }

  /// Position with t clamped to [0, T]: the emitter sits at its start point
  /// before emission and stops at its end point after T.
  Point3 position_clamped(double t) const;
  TrajectoryState eval_clamped(double t) const;

  const std::vector<double>& knot_times() const { return knot_times_; }
  const std::vector<Point3>& knot_points() const { return knot_points_; }

 private:
  TrajectoryState eval_unchecked(double t) const;

  Kind kind_{Kind::Sampled};
  std::string id_;
  double terminal_time_{};
  double v_max_{};
  Curve position_;
  Curve velocity_;
  std::vector<double> knot_times_;
  std::vector<Point3> knot_points_;
};

TrajectoryState eval_trajectory(const Trajectory& traj, double t);

struct BuiltinParams {
  double stroke_speed{8.0};     // hello: speed along letter strokes, m/s
  double connector_speed{80.0};  // hello: speed between letters, m/s
};

/// Stable scenario ids: letter-C, digit-3, digit-8, cyl-spiral, cone-spiral, hello.
Trajectory builtin_trajectory(const std::string& name, const BuiltinParams& params = {});
const std::vector<std::string>& builtin_trajectory_names();

/// Max speed over 10^4 uniform samples of (0, T], times 1.01.
double sampled_speed_bound(const Trajectory& traj);

/// CSV rows `t,x1,x2,x3` (with header), 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::vector<double>& times);
/// Reads `t,x1,x2,x3` rows into a sampled trajectory.
Trajectory read_trajectory_csv(std::istream& is, const std::string& id = "csv");

}  // namespace mtrack
