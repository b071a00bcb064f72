#include "mtrack/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mtrack/errors.hpp"

namespace mtrack {

namespace {

constexpr double kPi = std::numbers::pi;

double max_segment_speed(const std::vector<double>& times, const std::vector<Point3>& points) {
  double vmax = 0.0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k)
    vmax = std::max(vmax, distance(points[k + 1], points[k]) / (times[k + 1] - times[k]));
  return vmax;
}

}  // namespace

Trajectory Trajectory::analytic(std::string id, double terminal_time, Curve position, Curve velocity) {
  if (!(terminal_time > 0.0)) throw InvalidArgument("trajectory: terminal time must be positive");
  Trajectory tr;
  tr.kind_ = Kind::AnalyticBuiltin;
  tr.id_ = std::move(id);
  tr.terminal_time_ = terminal_time;
  tr.position_ = std::move(position);
  tr.velocity_ = std::move(velocity);
  tr.v_max_ = sampled_speed_bound(tr);
  return tr;
}

Trajectory Trajectory::sampled(std::string id, std::vector<double> times, std::vector<Point3> points) {
  if (times.empty() || times.size() != points.size())
    throw InvalidArgument("trajectory: need matching, non-empty knot times and points");
  if (times.front() < 0.0) throw InvalidArgument("trajectory: knot times must be non-negative");
  if (!(times.back() > 0.0)) throw InvalidArgument("trajectory: last knot time must be positive");
  for (std::size_t k = 0; k + 1 < times.size(); ++k)
    if (!(times[k + 1] > times[k])) throw InvalidArgument("trajectory: knot times must be strictly increasing");
  for (const auto& p : points)
    if (!is_finite(p)) throw InvalidArgument("trajectory: knot points must be finite");
  Trajectory tr;
  tr.kind_ = Kind::Sampled;
  tr.id_ = std::move(id);
  tr.terminal_time_ = times.back();
  tr.v_max_ = max_segment_speed(times, points);
  tr.knot_times_ = std::move(times);
  tr.knot_points_ = std::move(points);
  return tr;
}

Trajectory Trajectory::constant(const Point3& p, double terminal_time) {
  return sampled("constant", {terminal_time}, {p});
}

Trajectory Trajectory::with_v_max(double v_max) const {
  Trajectory tr = *this;
  tr.v_max_ = v_max;
  return tr;
}

Trajectory Trajectory::with_kind(Kind kind) const {
  Trajectory tr = *this;
  tr.kind_ = kind;
  return tr;
}

TrajectoryState Trajectory::eval_unchecked(double t) const {
  if (position_) return {position_(t), velocity_(t)};

  const auto& ts = knot_times_;
  const auto& ps = knot_points_;
  if (ts.size() == 1 || t <= ts.front()) {
    if (ts.size() > 1 && t == ts.front())
      return {ps.front(), (ps[1] - ps[0]) / (ts[1] - ts[0])};
    return {ps.front(), {}};
  }
  // Segment [ts[k], ts[k+1]) holding t; the last knot uses the final segment.
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t k = static_cast<std::size_t>(it - ts.begin()) - 1;
  if (k + 1 >= ts.size()) k = ts.size() - 2;
  const double span = ts[k + 1] - ts[k];
  const Point3 slope = (ps[k + 1] - ps[k]) / span;
  if (t == ts[k]) return {ps[k], slope};
  if (t >= ts[k + 1]) return {ps[k + 1], slope};
  return {ps[k] + ((t - ts[k]) / span) * (ps[k + 1] - ps[k]), slope};
}

TrajectoryState Trajectory::eval(double t) const {
  if (!(t > 0.0 && t <= terminal_time_)) {
    std::ostringstream msg;
    msg << "trajectory '" << id_ << "': t = " << t << " outside (0, " << terminal_time_ << "]";
    throw DomainError(msg.str());
  }
  return eval_unchecked(t);
}

TrajectoryState Trajectory::eval_clamped(double t) const {
  return eval_unchecked(std::clamp(t, 0.0, terminal_time_));
}

Point3 Trajectory::position_clamped(double t) const { return eval_clamped(t).position; }

TrajectoryState eval_trajectory(const Trajectory& traj, double t) { return traj.eval(t); }

double sampled_speed_bound(const Trajectory& traj) {
  constexpr int kSamples = 10000;
  double vmax = 0.0;
  for (int i = 1; i <= kSamples; ++i) {
    const double t = traj.terminal_time() * static_cast<double>(i) / kSamples;
    vmax = std::max(vmax, norm(traj.eval_clamped(t).velocity));
  }
  return 1.01 * vmax;
}

namespace {

Trajectory letter_c() {
  constexpr double w = 3.0 * kPi / 20.0;
  return Trajectory::analytic(
      "letter-C", 10.0,
      [](double t) { return Point3{0.0, 3.0 * std::cos(w * t + kPi / 4), 3.0 * std::sin(w * t + kPi / 4)}; },
      [](double t) {
        return Point3{0.0, -3.0 * w * std::sin(w * t + kPi / 4), 3.0 * w * std::cos(w * t + kPi / 4)};
      });
}

Trajectory digit_3() {
  return Trajectory::analytic(
      "digit-3", 10.0,
      [](double t) {
        const double a = (t - 5.0) * kPi / 5.0;
        return Point3{0.0, 5.0 * std::abs(std::sin(a)) - 2.0, 5.0 - t};
      },
      [](double t) {
        const double a = (t - 5.0) * kPi / 5.0;
        const double s = std::sin(a);
        // Right-hand derivative of |sin a| at its zeros follows the sign of cos a.
        const double sign = s != 0.0 ? std::copysign(1.0, s) : std::copysign(1.0, std::cos(a));
        return Point3{0.0, kPi * std::cos(a) * sign, -1.0};
      });
}

Trajectory digit_8() {
  auto lower_branch = [](double t) { return t <= 3.0 || t > 7.0; };
  return Trajectory::analytic(
      "digit-8", 8.0,
      [lower_branch](double t) {
        if (lower_branch(t)) {
          const double b = (t - 2.0) * kPi / 2.0;
          return Point3{0.0, -2.0 * std::cos(b), 2.0 * std::sin(b) - 2.0};
        }
        return Point3{0.0, 2.0 * std::cos(kPi * t / 2.0), 2.0 * std::sin(kPi * t / 2.0) + 2.0};
      },
      [](double t) {
        // right-hand derivative: the upper circle owns [3, 7)
        if (t >= 3.0 && t < 7.0)
          return Point3{0.0, -kPi * std::sin(kPi * t / 2.0), kPi * std::cos(kPi * t / 2.0)};
        const double b = (t - 2.0) * kPi / 2.0;
        return Point3{0.0, kPi * std::sin(b), kPi * std::cos(b)};
      });
}

Trajectory cyl_spiral() {
  return Trajectory::analytic(
      "cyl-spiral", 20.0,
      [](double t) { return Point3{3.0 * std::cos(t), 3.0 * std::sin(t), 0.5 * t - 5.0}; },
      [](double t) { return Point3{-3.0 * std::sin(t), 3.0 * std::cos(t), 0.5}; });
}

Trajectory cone_spiral() {
  return Trajectory::analytic(
      "cone-spiral", 20.0,
      [](double t) { return Point3{0.2 * t * std::cos(t), 0.2 * t * std::sin(t), 0.5 * t - 5.0}; },
      [](double t) {
        return Point3{0.2 * std::cos(t) - 0.2 * t * std::sin(t), 0.2 * std::sin(t) + 0.2 * t * std::cos(t), 0.5};
      });
}

// Polyline under construction, timed by arc length at a fixed speed per piece.
class TimedPolyline {
 public:
  explicit TimedPolyline(Point3 start) : times_{0.0}, points_{start} {}

  double now() const { return times_.back(); }
  const Point3& end() const { return points_.back(); }

  void move_to(const Point3& p, double speed) {
    const double len = distance(p, end());
    if (len == 0.0) return;
    times_.push_back(now() + len / speed);
    points_.push_back(p);
  }

  void stroke(const std::vector<Point3>& path, double speed) {
    for (const auto& p : path) move_to(p, speed);
  }

  /// Retrace the tail of `path` backwards by length/2 and return to its end,
  /// at the given speed. Adds dwell time without changing the drawn shape.
  void back_and_forth(const std::vector<Point3>& path, double length, double speed) {
    if (length <= 0.0) return;
    double remaining = 0.5 * length;
    std::vector<Point3> back;
    for (std::size_t k = path.size() - 1; k > 0 && remaining > 0.0; --k) {
      const double seg = distance(path[k], path[k - 1]);
      if (seg >= remaining) {
        back.push_back(path[k] + (remaining / seg) * (path[k - 1] - path[k]));
        remaining = 0.0;
      } else {
        back.push_back(path[k - 1]);
        remaining -= seg;
      }
    }
    if (remaining > 0.0) throw InvalidArgument("hello: padding longer than the stroke");
    const Point3 tip = path.back();
    for (const auto& p : back) move_to(p, speed);
    for (std::size_t k = back.size(); k-- > 1;) move_to(back[k - 1], speed);
    move_to(tip, speed);
  }

  /// Pins the last knot to an exact time (absorbs rounding of arc-length timing).
  void pin_last_time(double t) { times_.back() = t; }

  std::vector<double> times() const { return times_; }
  std::vector<Point3> points() const { return points_; }

 private:
  std::vector<double> times_;
  std::vector<Point3> points_;
};

// "HELLO" in the plane x1 = 5 facing the receivers, letters 2.4 m wide and
// 5 m tall, 0.9 m apart. Strokes run at the stroke speed and the pen moves
// between letters at the connector speed. Each connector is timed to end
// exactly on the 0.1 s recording grid (short back-and-forth retraces absorb
// the slack) so a connector never straddles a sample, and the final letter is
// padded to finish at T = 8 s. The second L lingers 0.2 s so the jump to O
// spans the emitter's zero phase at t = 2 pi, where single-step estimates are
// unreliable.
Trajectory hello(const BuiltinParams& params) {
  constexpr double kWidth = 2.4;
  constexpr double kHeight = 5.0;
  constexpr double kGap = 0.9;
  constexpr double kLeft = -7.8;
  constexpr double kBottom = -2.5;
  constexpr double kDepth = 5.0;
  constexpr double kLinger[] = {0.0, 0.0, 0.0, 0.2};
  constexpr double kDt = 0.1;
  constexpr double kTerminal = 8.0;
  const double vs = params.stroke_speed;
  const double vc = params.connector_speed;
  if (!(vs > 0.0 && vc > 0.0)) throw InvalidArgument("hello: speeds must be positive");

  auto at = [](std::size_t letter, double u, double v) {
    const double x2 = kLeft + static_cast<double>(letter) * (kWidth + kGap) + u * kWidth;
    return Point3{kDepth, x2, kBottom + v * kHeight};
  };

  std::vector<std::vector<Point3>> letters;
  letters.push_back({at(0, 0, 1), at(0, 0, 0), at(0, 0, 0.5), at(0, 1, 0.5), at(0, 1, 1), at(0, 1, 0)});
  letters.push_back({at(1, 1, 1), at(1, 0, 1), at(1, 0, 0.5), at(1, 0.8, 0.5), at(1, 0, 0.5), at(1, 0, 0),
                     at(1, 1, 0)});
  letters.push_back({at(2, 0, 1), at(2, 0, 0), at(2, 1, 0)});
  letters.push_back({at(3, 0, 1), at(3, 0, 0), at(3, 1, 0)});
  {
    std::vector<Point3> o;
    constexpr int kSides = 72;
    for (int i = 0; i <= kSides; ++i) {
      const double a = kPi / 2 + 2.0 * kPi * i / kSides;
      o.push_back(at(4, 0.5 + 0.5 * std::cos(a), 0.5 + 0.5 * std::sin(a)));
    }
    letters.push_back(std::move(o));
  }

  TimedPolyline path(letters.front().front());
  for (std::size_t k = 0; k < letters.size(); ++k) {
    path.stroke(letters[k], vs);
    if (k + 1 < letters.size()) {
      const Point3 next = letters[k + 1].front();
      const double connector = distance(next, path.end()) / vc;
      const double slot_end = std::ceil((path.now() + connector) / kDt - 1e-9) * kDt + kLinger[k];
      path.back_and_forth(letters[k], vs * (slot_end - path.now() - connector), vs);
      path.move_to(next, vc);
      path.pin_last_time(std::round(slot_end / kDt) * kDt);
    } else {
      const double slack = kTerminal - path.now();
      if (slack < 0.0) throw InvalidArgument("hello: strokes exceed the terminal time");
      path.back_and_forth(letters[k], vs * slack, vs);
      path.pin_last_time(kTerminal);
    }
  }
  Trajectory tr = Trajectory::sampled("hello", path.times(), path.points());
  return tr.with_kind(Trajectory::Kind::AnalyticBuiltin).with_v_max(sampled_speed_bound(tr));
}

}  // namespace

const std::vector<std::string>& builtin_trajectory_names() {
  static const std::vector<std::string> names{"letter-C", "digit-3", "digit-8", "cyl-spiral", "cone-spiral", "hello"};
  return names;
}

Trajectory builtin_trajectory(const std::string& name, const BuiltinParams& params) {
  if (name == "letter-C") return letter_c();
  if (name == "digit-3") return digit_3();
  if (name == "digit-8") return digit_8();
  if (name == "cyl-spiral") return cyl_spiral();
  if (name == "cone-spiral") return cone_spiral();
  if (name == "hello") return hello(params);
  throw InvalidArgument("unknown scenario '" + name + "'");
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::vector<double>& times) {
  os << "t,x1,x2,x3\n";
  char buf[128];
  for (double t : times) {
    const Point3 p = traj.position_clamped(t);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t, p.x1, p.x2, p.x3);
    os << buf;
  }
}

Trajectory read_trajectory_csv(std::istream& is, const std::string& id) {
  std::vector<double> times;
  std::vector<Point3> points;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
    double t{}, a{}, b{}, c{};
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &t, &a, &b, &c) != 4)
      throw IoError("trajectory csv: malformed row '" + line + "'");
    times.push_back(t);
    points.push_back({a, b, c});
  }
  return Trajectory::sampled(id, std::move(times), std::move(points));
}

}  // namespace mtrack
