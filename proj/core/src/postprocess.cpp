#include "mtrack/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mtrack/errors.hpp"

namespace mtrack {

Point3 FourierCurve::eval(double t) const {
  const double s = (t - time_shift) * time_scale;
  Point3 z = a0;
  for (std::size_t n = 1; n <= order; ++n) {
    const double ns = static_cast<double>(n) * s;
    z = z + std::cos(ns) * a[n - 1] + std::sin(ns) * b[n - 1];
  }
  return z;
}

FourierCurve fourier_fit(std::span<const TimedPoint> points, double span, std::size_t order, double time_shift,
                         double time_scale) {
  if (points.empty()) throw InvalidArgument("fourier_fit: no points");
  if (!(span > 0.0)) throw InvalidArgument("fourier_fit: span must be positive");
  if (!(time_scale > 0.0)) throw InvalidArgument("fourier_fit: time scale must be positive");
  const double count = static_cast<double>(points.size());

  FourierCurve c;
  c.order = order;
  c.span = span;
  c.time_shift = time_shift;
  c.time_scale = time_scale;
  const Point3 first = points.front().z;
  Point3 diff{};
  for (const auto& p : points) diff = diff + (p.z - first);
  c.a0 = first + diff / count;

  c.a.resize(order);
  c.b.resize(order);
  for (std::size_t n = 1; n <= order; ++n) {
    Point3 sa{}, sb{};
    for (const auto& p : points) {
      const double ns = static_cast<double>(n) * (p.t - time_shift) * time_scale;
      sa = sa + std::cos(ns) * p.z;
      sb = sb + std::sin(ns) * p.z;
    }
    c.a[n - 1] = (2.0 / count) * sa;
    c.b[n - 1] = (2.0 / count) * sb;
  }
  return c;
}

double fit_residual(const FourierCurve& curve, std::span<const TimedPoint> points) {
  double s = 0.0;
  for (const auto& p : points) {
    const Point3 d = curve.eval(p.t) - p.z;
    s += dot(d, d);
  }
  return s;
}

std::vector<IndexRange> segment_gaps(std::span<const TimedPoint> points, double factor) {
  if (!(factor > 1.0)) throw InvalidArgument("segment_gaps: factor must exceed 1");
  if (points.size() < 2) return {{0, points.size()}};
  std::vector<double> d(points.size() - 1);
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < points.size(); ++j) {
    d[j] = distance(points[j].z, points[j + 1].z);
    total += d[j];
  }
  const double threshold = factor * total / static_cast<double>(d.size());
  std::vector<IndexRange> ranges;
  std::size_t begin = 0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (d[j] > threshold) {
      ranges.push_back({begin, j + 1});
      begin = j + 1;
    }
  }
  ranges.push_back({begin, points.size()});
  if (ranges.size() == 1) return ranges;
  // a point cut off on both sides is a connector sample, not a stroke
  std::erase_if(ranges, [](const IndexRange& r) { return r.size() < 2; });
  return ranges;
}

std::vector<TimedPoint> timed_points(const ReconResult& result) {
  std::vector<TimedPoint> out;
  out.reserve(result.points.size());
  for (const auto& p : result.points) out.push_back({p.t, p.z});
  return out;
}

SegmentSet smooth_points(std::vector<TimedPoint> points, double dt, const SmoothOptions& options) {
  if (points.empty()) throw InvalidArgument("smooth: no points");
  if (!(dt > 0.0)) throw InvalidArgument("smooth: dt must be positive");
  SegmentSet out;
  out.points = std::move(points);
  const std::vector<IndexRange> ranges =
      options.segmented ? segment_gaps(out.points, options.gap_factor) : std::vector<IndexRange>{{0, out.points.size()}};

  for (const IndexRange& r : ranges) {
    const std::span<const TimedPoint> nodes(out.points.data() + r.begin, r.size());
    SmoothSegment seg;
    seg.range = r;
    seg.requested_order = options.order;
    const std::size_t max_order = (r.size() - 1) / 2;
    seg.order_reduced = options.order > max_order;
    const std::size_t order = std::min(options.order, max_order);
    const double shift = nodes.front().t - dt;
    const double span = static_cast<double>(r.size()) * dt;
    // split segments are stretched over one period of the basis
    const double scale = ranges.size() == 1 ? 1.0 : 2.0 * std::numbers::pi / span;
    seg.curve = fourier_fit(nodes, span, order, shift, scale);
    seg.residual_ss = fit_residual(seg.curve, nodes);
    seg.residual_rms = std::sqrt(seg.residual_ss / static_cast<double>(r.size()));
    out.segments.push_back(std::move(seg));
  }
  return out;
}

SegmentSet smooth(const ReconResult& result, const SmoothOptions& options) {
  if (result.points.empty()) throw InvalidArgument("smooth: reconstruction has no points");
  const TimeGrid& grid = result.grid;
  std::vector<TimedPoint> filled(grid.size());
  std::vector<const ReconPoint*> at_step(grid.size() + 1, nullptr);
  for (const auto& p : result.points) at_step.at(p.step) = &p;

  const ReconPoint* prev = nullptr;
  std::size_t next_idx = 0;
  for (std::size_t step = 1; step <= grid.size(); ++step) {
    const double t = grid.time(step);
    if (at_step[step]) {
      prev = at_step[step];
      filled[step - 1] = {t, prev->z};
      continue;
    }
    while (next_idx < result.points.size() && result.points[next_idx].step < step) ++next_idx;
    const ReconPoint* next = next_idx < result.points.size() ? &result.points[next_idx] : nullptr;
    Point3 z;
    if (prev && next) {
      const double w = (t - prev->t) / (next->t - prev->t);
      z = prev->z + w * (next->z - prev->z);
    } else {
      z = prev ? prev->z : next->z;
    }
    filled[step - 1] = {t, z};
  }
  return smooth_points(std::move(filled), grid.dt(), options);
}

double fraction_within(std::span<const double> distances, double k, double cell) {
  if (distances.empty()) return 0.0;
  const double limit = k * cell;
  const auto n = std::count_if(distances.begin(), distances.end(), [&](double d) { return d <= limit; });
  return static_cast<double>(n) / static_cast<double>(distances.size());
}

double hausdorff_distance(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("hausdorff: empty point set");
  auto directed = [](std::span<const Point3> from, std::span<const Point3> to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, distance(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

TrajectoryMetrics trajectory_error(const ReconResult& result, const Trajectory& truth, double cell_size,
                                   const SegmentSet* smoothed) {
  if (result.points.empty()) throw InvalidArgument("trajectory_error: reconstruction has no points");
  TrajectoryMetrics m;
  m.cell_size = cell_size;
  double sum = 0.0;
  for (const auto& p : result.points) {
    const double d = distance(p.z, truth.position_clamped(p.t));
    m.per_step.push_back(d);
    sum += d;
    m.max = std::max(m.max, d);
  }
  m.mean = sum / static_cast<double>(m.per_step.size());
  m.within_1_cell = fraction_within(m.per_step, 1.0, cell_size);
  m.within_2_cells = fraction_within(m.per_step, 2.0, cell_size);

  if (smoothed && !smoothed->segments.empty()) {
    std::vector<Point3> curve, exact;
    for (const auto& seg : smoothed->segments)
      for (std::size_t j = seg.range.begin; j < seg.range.end; ++j)
        curve.push_back(seg.curve.eval(smoothed->points[j].t));
    for (const auto& p : smoothed->points) exact.push_back(truth.position_clamped(p.t));
    m.hausdorff = hausdorff_distance(curve, exact);
    m.has_hausdorff = true;
  }
  return m;
}

}  // namespace mtrack
