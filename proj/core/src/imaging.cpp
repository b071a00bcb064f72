#include "mtrack/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "mtrack/errors.hpp"
#include "mtrack/parallel.hpp"

namespace mtrack {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSkipRatio = 1e-12;

// 1/||x_m - z|| for every receiver and the matching weighted L2 norm of the
// unscaled test function. False when z is too close to a receiver.
bool inverse_distances(const ReceiverArray& rcv, const Point3& z, double exclusion, double* inv_r,
                       double& phi_norm) {
  double s = 0.0;
  for (std::size_t m = 0; m < rcv.size(); ++m) {
    const double r = distance(rcv.positions[m], z);
    if (r <= exclusion || r == 0.0) return false;
    inv_r[m] = 1.0 / r;
    s += rcv.weights[m] * inv_r[m] * inv_r[m];
  }
  phi_norm = std::sqrt(s);
  return true;
}

inline double correlation(double acc, double column_norm, double phi_norm) {
  // Cauchy-Schwarz bounds the exact value by 1; clip rounding overshoot.
  return std::min(1.0, std::abs(acc) / (column_norm * phi_norm));
}

double column_norm_of(const ReceiverArray& rcv, std::span<const double> column) {
  double s = 0.0;
  for (std::size_t m = 0; m < rcv.size(); ++m) s += column[m] * column[m] * rcv.weights[m];
  return std::sqrt(s);
}

}  // namespace

double test_function(const Point3& x, double t, const Point3& z, double omega0) {
  const double r = distance(x, z);
  if (r == 0.0) throw SingularPoint("test function evaluated at the sampling point");
  return std::sin(omega0 * t) / (4.0 * std::numbers::pi * r);
}

ColumnIndicator::ColumnIndicator(const WaveRecord& record, std::size_t step, const IndicatorParams& params)
    : ColumnIndicator(record.receivers(), record.column(step), record.grid().time(step), params) {}

ColumnIndicator::ColumnIndicator(const ReceiverArray& receivers, std::span<const double> column, double t,
                                 const IndicatorParams& params)
    : receivers_(&receivers), params_(params), t_(t) {
  if (column.size() != receivers.size()) throw InvalidArgument("indicator: column length differs from receivers");
  if (!(params.omega0 > 0.0) || !(params.exclusion_radius >= 0.0))
    throw InvalidArgument("indicator: omega0 must be positive and exclusion radius non-negative");
  test_scale_ = std::sin(params.omega0 * t);
  column_norm_ = column_norm_of(receivers, column);
  weighted_.resize(column.size());
  for (std::size_t m = 0; m < column.size(); ++m) weighted_[m] = column[m] * receivers.weights[m];
}

double ColumnIndicator::value_or_nan(const Point3& z) const {
  if (!defined()) return kNaN;
  const std::size_t nm = receivers_->size();
  std::vector<double> inv_r(nm);
  double phi_norm = 0.0;
  if (!inverse_distances(*receivers_, z, params_.exclusion_radius, inv_r.data(), phi_norm)) return kNaN;
  double acc = 0.0;
  for (std::size_t m = 0; m < nm; ++m) acc += weighted_[m] * inv_r[m];
  return correlation(acc, column_norm_, phi_norm);
}

double ColumnIndicator::value(const Point3& z) const {
  if (!defined()) {
    std::ostringstream msg;
    msg << "indicator undefined at t = " << t_ << " (zero column or sin(omega0 t) = 0)";
    throw UndefinedIndicator(msg.str());
  }
  const double v = value_or_nan(z);
  if (std::isnan(v)) throw UndefinedIndicator("indicator undefined: sampling point within exclusion radius of a receiver");
  return v;
}

IndicatorField::IndicatorField(const WaveRecord& record, const IndicatorParams& params)
    : receivers_(&record.receivers()), params_(params), n_steps_(record.n_steps()) {
  if (!(params.omega0 > 0.0) || !(params.exclusion_radius >= 0.0))
    throw InvalidArgument("indicator: omega0 must be positive and exclusion radius non-negative");
  const auto& rcv = record.receivers();
  weighted_.resize(rcv.size() * n_steps_);
  for (std::size_t m = 0; m < rcv.size(); ++m) {
    const auto row = record.row(m);
    for (std::size_t j = 0; j < n_steps_; ++j) weighted_[m * n_steps_ + j] = row[j] * rcv.weights[m];
  }
  column_norms_.resize(n_steps_);
  test_scale_.resize(n_steps_);
  for (std::size_t step = 1; step <= n_steps_; ++step) {
    const auto col = record.column(step);
    column_norms_[step - 1] = column_norm_of(rcv, col);
    test_scale_[step - 1] = std::sin(params.omega0 * record.grid().time(step));
    max_norm_ = std::max(max_norm_, column_norms_[step - 1]);
  }
}

bool IndicatorField::usable(std::size_t step) const {
  const double n = column_norms_[step - 1];
  return n > 0.0 && n >= kSkipRatio * max_norm_ && test_scale_[step - 1] != 0.0;
}

bool IndicatorField::values_at(const Point3& z, std::span<double> out) const {
  const std::size_t nm = receivers_->size();
  std::vector<double> inv_r(nm);
  double phi_norm = 0.0;
  if (!inverse_distances(*receivers_, z, params_.exclusion_radius, inv_r.data(), phi_norm)) return false;
  std::vector<double> acc(n_steps_, 0.0);
  for (std::size_t m = 0; m < nm; ++m) {
    const double ir = inv_r[m];
    const double* w = weighted_.data() + m * n_steps_;
    for (std::size_t j = 0; j < n_steps_; ++j) acc[j] += w[j] * ir;
  }
  for (std::size_t j = 0; j < n_steps_; ++j)
    out[j] = usable(j + 1) ? correlation(acc[j], column_norms_[j], phi_norm) : kNaN;
  return true;
}

double indicator(const WaveRecord& record, std::size_t step, const Point3& z, const IndicatorParams& params) {
  return ColumnIndicator(record, step, params).value(z);
}

ArgmaxResult argmax_over(const ColumnIndicator& column, const SamplingMesh& mesh, std::span<const std::size_t> flat) {
  ArgmaxResult best{{}, -1.0, 0};
  for (std::size_t idx : flat) {
    const Point3 z = mesh.point(idx);
    const double v = column.value_or_nan(z);
    if (v > best.value) best = {z, v, idx};
  }
  if (best.value < 0.0) throw UndefinedIndicator("argmax: indicator undefined at every candidate point");
  return best;
}

ArgmaxResult grid_argmax(const ColumnIndicator& column, const SamplingMesh& mesh) {
  if (!column.defined()) column.value({});  // throws the undefined-column error
  ArgmaxResult best{{}, -1.0, 0};
  for (std::size_t idx = 0; idx < mesh.size(); ++idx) {
    const Point3 z = mesh.point(idx);
    const double v = column.value_or_nan(z);
    if (v > best.value) best = {z, v, idx};
  }
  if (best.value < 0.0) throw UndefinedIndicator("argmax: indicator undefined at every mesh point");
  return best;
}

ArgmaxResult grid_argmax(const WaveRecord& record, std::size_t step, const SamplingMesh& mesh,
                         const IndicatorParams& params) {
  return grid_argmax(ColumnIndicator(record, step, params), mesh);
}

ReconResult reconstruct_global(const WaveRecord& record, const SamplingMesh& mesh, const IndicatorParams& params) {
  const IndicatorField field(record, params);
  const std::size_t nt = record.n_steps();
  constexpr std::size_t kBlock = 2048;
  const std::size_t n_blocks = (mesh.size() + kBlock - 1) / kBlock;

  struct Best {
    double value{-1.0};
    std::size_t flat{};
  };
  std::vector<Best> block_best(n_blocks * nt);
  parallel_for(n_blocks, [&](std::size_t b) {
    std::vector<double> values(nt);
    Best* best = block_best.data() + b * nt;
    const std::size_t end = std::min(mesh.size(), (b + 1) * kBlock);
    for (std::size_t idx = b * kBlock; idx < end; ++idx) {
      if (!field.values_at(mesh.point(idx), values)) continue;
      for (std::size_t j = 0; j < nt; ++j)
        if (values[j] > best[j].value) best[j] = {values[j], idx};
    }
  });

  ReconResult out;
  out.method = SearchMethod::Global;
  out.grid = record.grid();
  for (std::size_t step = 1; step <= nt; ++step) {
    if (!field.usable(step)) {
      out.skipped.push_back(step);
      continue;
    }
    Best best;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const Best& cand = block_best[b * nt + step - 1];
      if (cand.value > best.value) best = cand;
    }
    if (best.value < 0.0) {
      out.skipped.push_back(step);
      continue;
    }
    out.points.push_back({step, record.grid().time(step), mesh.point(best.flat), best.value, false});
  }
  return out;
}

namespace {

double slack_of(const SamplingMesh& mesh, const TrackingOptions& options) {
  return options.lattice_slack ? mesh.cell_diagonal() : 0.0;
}

ArgmaxResult ball_search(const ColumnIndicator& column, const SamplingMesh& mesh, const Point3& center, double radius) {
  const auto candidates = mesh.ball(center, radius);
  if (candidates.size() < 2) {
    std::ostringstream msg;
    msg << "search ball of radius " << radius << " m holds no lattice point besides its centre (cell size "
        << mesh.cell_size() << " m); raise v_max or refine the mesh";
    throw EmptySearchBall(msg.str());
  }
  return argmax_over(column, mesh, candidates);
}

}  // namespace

SequentialTracker::SequentialTracker(const SamplingMesh& mesh, double v_max, double dt, TrackingOptions options)
    : mesh_(&mesh), v_max_(v_max), dt_(dt), options_(options) {
  if (!(v_max > 0.0)) throw InvalidArgument("sequential tuning: v_max must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("sequential tuning: dt must be positive");
}

std::optional<ReconPoint> SequentialTracker::advance(const ColumnIndicator& column, std::size_t step) {
  running_max_norm_ = std::max(running_max_norm_, column.column_norm());
  if (!column.defined() || column.column_norm() < kSkipRatio * running_max_norm_) return std::nullopt;

  ArgmaxResult best;
  if (!last_) {
    best = grid_argmax(column, *mesh_);
  } else {
    const double elapsed = static_cast<double>(step - last_->step) * dt_;
    best = ball_search(column, *mesh_, last_->z, v_max_ * elapsed + slack_of(*mesh_, options_));
  }
  last_ = ReconPoint{step, column.t(), best.z, best.value, false};
  return last_;
}

ReconResult reconstruct_sequential(const WaveRecord& record, const SamplingMesh& mesh, double v_max,
                                   const IndicatorParams& params, TrackingOptions options) {
  SequentialTracker tracker(mesh, v_max, record.grid().dt(), options);
  ReconResult out;
  out.method = SearchMethod::Sequential;
  out.grid = record.grid();
  for (std::size_t step = 1; step <= record.n_steps(); ++step) {
    const ColumnIndicator column(record, step, params);
    if (auto p = tracker.advance(column, step))
      out.points.push_back(*p);
    else
      out.skipped.push_back(step);
  }
  return out;
}

TuningSchedule parallel_schedule(std::size_t n_steps, double v_max, double terminal_time) {
  if (n_steps == 0) throw InvalidArgument("parallel schedule: need at least one step");
  const double dt = terminal_time / static_cast<double>(n_steps);
  const std::size_t top = static_cast<std::size_t>(std::bit_width(n_steps)) - 1;  // floor(log2 N_t)
  auto radius = [&](std::size_t level) {
    const std::size_t div = std::size_t{1} << (level + 1);
    return v_max * static_cast<double>((n_steps + div - 1) / div) * dt;
  };

  TuningSchedule s;
  s.levels = top + 1;
  std::map<std::size_t, std::ptrdiff_t> entry_of_step;
  // (level, slot) -> schedule index; dropped repeats alias the entry owning that step
  std::map<std::pair<std::size_t, std::size_t>, std::ptrdiff_t> node;

  s.entries.push_back({0, 1, n_steps, radius(0), -1});
  entry_of_step[n_steps] = 0;
  node[{0, 1}] = 0;
  for (std::size_t level = 1; level <= top; ++level) {
    const std::size_t slots = std::size_t{1} << (level - 1);
    for (std::size_t n = 1; n <= slots; ++n) {
      const std::size_t step = ((2 * n - 1) * n_steps) >> level;
      const std::ptrdiff_t parent = node.at({level - 1, (n + 1) / 2});
      if (step == 0) continue;
      if (auto it = entry_of_step.find(step); it != entry_of_step.end()) {
        node[{level, n}] = it->second;
        continue;
      }
      const auto idx = static_cast<std::ptrdiff_t>(s.entries.size());
      s.entries.push_back({level, n, step, radius(level), parent});
      entry_of_step[step] = idx;
      node[{level, n}] = idx;
    }
  }
  for (std::size_t step = 1; step <= n_steps; ++step)
    if (!entry_of_step.contains(step)) s.unvisited.push_back(step);
  return s;
}

ReconResult reconstruct_parallel(const WaveRecord& record, const SamplingMesh& mesh, double v_max,
                                 const IndicatorParams& params, TrackingOptions options) {
  if (!(v_max > 0.0)) throw InvalidArgument("parallel tuning: v_max must be positive");
  const std::size_t nt = record.n_steps();
  const double dt = record.grid().dt();
  const double slack = slack_of(mesh, options);
  TuningSchedule schedule = parallel_schedule(nt, v_max, record.grid().terminal_time());

  std::vector<ColumnIndicator> columns;
  columns.reserve(nt);
  double max_norm = 0.0;
  for (std::size_t step = 1; step <= nt; ++step) {
    columns.emplace_back(record, step, params);
    max_norm = std::max(max_norm, columns.back().column_norm());
  }
  auto usable = [&](std::size_t step) {
    const auto& c = columns[step - 1];
    return c.defined() && c.column_norm() >= kSkipRatio * max_norm;
  };
  // Ball radius searched by an entry of the given level: the radius of B_{level-1, .}.
  auto search_radius = [&](std::size_t level) {
    const std::size_t div = std::size_t{1} << level;
    return v_max * static_cast<double>((nt + div - 1) / div) * dt;
  };

  const auto& entries = schedule.entries;
  std::vector<std::optional<ReconPoint>> found(entries.size());
  auto solve_entry = [&](std::size_t e) {
    const TuningEntry& entry = entries[e];
    if (!usable(entry.step)) return;
    const ColumnIndicator& column = columns[entry.step - 1];
    // Nearest resolved ancestor; each unresolved link widens the ball by its own radius.
    double radius = 0.0;
    std::ptrdiff_t anchor = entry.parent;
    std::size_t level = entry.level;
    while (anchor >= 0 && !found[static_cast<std::size_t>(anchor)]) {
      radius += search_radius(level);
      level = entries[static_cast<std::size_t>(anchor)].level;
      anchor = entries[static_cast<std::size_t>(anchor)].parent;
    }
    ArgmaxResult best;
    if (anchor < 0) {
      best = grid_argmax(column, mesh);
    } else {
      radius += search_radius(level) + slack;
      best = ball_search(column, mesh, found[static_cast<std::size_t>(anchor)]->z, radius);
    }
    found[e] = ReconPoint{entry.step, column.t(), best.z, best.value, false};
  };

  // Levels run in order; the slots of one level are independent.
  std::size_t begin = 0;
  while (begin < entries.size()) {
    std::size_t end = begin;
    while (end < entries.size() && entries[end].level == entries[begin].level) ++end;
    parallel_for(end - begin, [&](std::size_t k) { solve_entry(begin + k); });
    begin = end;
  }

  ReconResult out;
  out.method = SearchMethod::Parallel;
  out.grid = record.grid();
  std::map<std::size_t, ReconPoint> by_step;
  for (const auto& p : found)
    if (p) by_step.emplace(p->step, *p);
  const std::map<std::size_t, ReconPoint> visited = by_step;

  for (std::size_t step : schedule.unvisited) {
    if (!usable(step) || visited.empty()) continue;
    // nearest visited neighbour, lower step on ties
    auto hi = visited.lower_bound(step);
    const ReconPoint* anchor = nullptr;
    if (hi == visited.end()) {
      anchor = &std::prev(hi)->second;
    } else if (hi == visited.begin()) {
      anchor = &hi->second;
    } else {
      const auto lo = std::prev(hi);
      anchor = (step - lo->first <= hi->first - step) ? &lo->second : &hi->second;
    }
    const double gap = static_cast<double>(anchor->step > step ? anchor->step - step : step - anchor->step);
    const ColumnIndicator& column = columns[step - 1];
    const ArgmaxResult best = ball_search(column, mesh, anchor->z, v_max * gap * dt + slack);
    by_step.emplace(step, ReconPoint{step, column.t(), best.z, best.value, true});
  }

  for (std::size_t step = 1; step <= nt; ++step) {
    if (auto it = by_step.find(step); it != by_step.end())
      out.points.push_back(it->second);
    else
      out.skipped.push_back(step);
  }
  out.schedule = std::move(schedule);
  return out;
}

ReconResult reconstruct(SearchMethod method, const WaveRecord& record, const SamplingMesh& mesh, double v_max,
                        const IndicatorParams& params, TrackingOptions options) {
  switch (method) {
    case SearchMethod::Global: return reconstruct_global(record, mesh, params);
    case SearchMethod::Sequential: return reconstruct_sequential(record, mesh, v_max, params, options);
    case SearchMethod::Parallel: return reconstruct_parallel(record, mesh, v_max, params, options);
  }
  throw InvalidArgument("unknown search method");
}

}  // namespace mtrack
