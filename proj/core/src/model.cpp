#include "mtrack/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mtrack/errors.hpp"

namespace mtrack {

TimeGrid::TimeGrid(double terminal_time, std::size_t n_steps)
    : TimeGrid(terminal_time, n_steps, n_steps ? terminal_time / static_cast<double>(n_steps) : 0.0) {}

TimeGrid::TimeGrid(double terminal_time, std::size_t n_steps, double dt)
    : terminal_time_(terminal_time), n_steps_(n_steps), dt_(dt) {
  if (!(terminal_time > 0.0) || !std::isfinite(terminal_time))
    throw InvalidArgument("TimeGrid: terminal time must be positive and finite");
  if (n_steps == 0) throw InvalidArgument("TimeGrid: need at least one step");
}

TimeGrid TimeGrid::from_step(double dt, std::size_t n_steps) {
  if (!(dt > 0.0)) throw InvalidArgument("TimeGrid: dt must be positive");
  return TimeGrid(static_cast<double>(n_steps) * dt, n_steps, dt);
}

TimeGrid TimeGrid::restore(double terminal_time, std::size_t n_steps, double dt) {
  if (!(dt > 0.0) || std::abs(static_cast<double>(n_steps) * dt - terminal_time) > 1e-9 * terminal_time)
    throw InvalidArgument("TimeGrid: dt inconsistent with T / N_t");
  return TimeGrid(terminal_time, n_steps, dt);
}

double TimeGrid::time(std::size_t step) const {
  if (step == 0 || step > n_steps_) throw InvalidArgument("TimeGrid: step out of range");
  if (step == n_steps_) return terminal_time_;
  return static_cast<double>(step) * dt_;
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out(n_steps_);
  for (std::size_t j = 1; j <= n_steps_; ++j) out[j - 1] = time(j);
  return out;
}

double PatchParams::area() const {
  return radius * radius * (phi_max - phi_min) * (std::cos(theta_min) - std::cos(theta_max));
}

double ReceiverArray::total_weight() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

ReceiverArray make_receiver_array(double radius, double theta_min, double theta_max, double phi_min,
                                  double phi_max, std::size_t n_receivers) {
  if (!(radius > 0.0)) throw InvalidArgument("receiver patch: radius must be positive");
  if (!(theta_min >= 0.0 && theta_min < theta_max && theta_max <= std::numbers::pi))
    throw InvalidArgument("receiver patch: polar range must satisfy 0 <= min < max <= pi");
  if (!(phi_min < phi_max && phi_max - phi_min <= 2.0 * std::numbers::pi))
    throw InvalidArgument("receiver patch: azimuthal range must be non-degenerate and at most 2 pi");
  if (n_receivers == 0) throw InvalidArgument("receiver patch: need at least one receiver");

  const double dtheta_total = theta_max - theta_min;
  const double dphi_total = phi_max - phi_min;
  const double theta_mid = 0.5 * (theta_min + theta_max);
  const double aspect = dtheta_total / (dphi_total * std::max(std::sin(theta_mid), 1e-12));

  const auto n = static_cast<double>(n_receivers);
  auto n_theta = static_cast<std::size_t>(std::llround(std::sqrt(n * aspect)));
  n_theta = std::clamp<std::size_t>(n_theta, 1, n_receivers);
  const std::size_t n_phi = (n_receivers + n_theta - 1) / n_theta;
  n_theta = (n_receivers + n_phi - 1) / n_phi;

  ReceiverArray out;
  out.patch = {radius, theta_min, theta_max, phi_min, phi_max};
  out.n_theta = n_theta;
  out.n_phi = n_phi;
  out.positions.reserve(n_receivers);
  out.weights.reserve(n_receivers);

  const double dtheta = dtheta_total / static_cast<double>(n_theta);
  for (std::size_t row = 0; row < n_theta; ++row) {
    const std::size_t cells = (row + 1 < n_theta) ? n_phi : n_receivers - (n_theta - 1) * n_phi;
    const double ta = theta_min + static_cast<double>(row) * dtheta;
    const double tb = (row + 1 == n_theta) ? theta_max : ta + dtheta;
    const double tc = 0.5 * (ta + tb);
    const double dphi = dphi_total / static_cast<double>(cells);
    const double band = radius * radius * (std::cos(ta) - std::cos(tb));
    for (std::size_t c = 0; c < cells; ++c) {
      const double pc = phi_min + (static_cast<double>(c) + 0.5) * dphi;
      out.positions.push_back({radius * std::sin(tc) * std::cos(pc), radius * std::sin(tc) * std::sin(pc),
                               radius * std::cos(tc)});
      out.weights.push_back(band * dphi);
    }
  }
  return out;
}

bool Cuboid::contains(const Point3& p) const {
  return std::abs(p.x1 - center.x1) <= 0.5 * size.x1 && std::abs(p.x2 - center.x2) <= 0.5 * size.x2 &&
         std::abs(p.x3 - center.x3) <= 0.5 * size.x3;
}

void MediumSpec::validate() const {
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw InvalidArgument("medium: c0 must be positive");
  if (inclusion) {
    if (!(inclusion->speed > 0.0)) throw InvalidArgument("medium: inclusion speed must be positive");
    const Point3& s = inclusion->size;
    if (!(s.x1 > 0 && s.x2 > 0 && s.x3 > 0) || !is_finite(s) || !is_finite(inclusion->center))
      throw InvalidArgument("medium: inclusion must be a bounded cuboid");
  }
}

SamplingMesh::SamplingMesh(Point3 lo, Point3 hi, std::size_t n1, std::size_t n2, std::size_t n3)
    : lo_(lo), hi_(hi), n_{n1, n2, n3} {
  if (n1 < 2 || n2 < 2 || n3 < 2) throw InvalidArgument("SamplingMesh: resolution must be at least 2 per axis");
  if (!(lo.x1 < hi.x1 && lo.x2 < hi.x2 && lo.x3 < hi.x3))
    throw InvalidArgument("SamplingMesh: low corner must be below high corner");
  h_ = {(hi.x1 - lo.x1) / static_cast<double>(n1 - 1), (hi.x2 - lo.x2) / static_cast<double>(n2 - 1),
        (hi.x3 - lo.x3) / static_cast<double>(n3 - 1)};
}

SamplingMesh SamplingMesh::cube(double half_width, std::size_t n) {
  return SamplingMesh({-half_width, -half_width, -half_width}, {half_width, half_width, half_width}, n, n, n);
}

double SamplingMesh::cell_size() const { return std::max({h_.x1, h_.x2, h_.x3}); }

double SamplingMesh::cell_diagonal() const { return norm(h_); }

Point3 SamplingMesh::point(std::size_t i1, std::size_t i2, std::size_t i3) const {
  // Pin the last index to the high corner so the lattice covers D inclusively.
  auto coord = [](double lo, double hi, double h, std::size_t i, std::size_t n) {
    return i + 1 == n ? hi : lo + static_cast<double>(i) * h;
  };
  return {coord(lo_.x1, hi_.x1, h_.x1, i1, n_[0]), coord(lo_.x2, hi_.x2, h_.x2, i2, n_[1]),
          coord(lo_.x3, hi_.x3, h_.x3, i3, n_[2])};
}

Point3 SamplingMesh::point(std::size_t flat) const {
  const std::size_t i3 = flat % n_[2];
  const std::size_t rest = flat / n_[2];
  return point(rest / n_[1], rest % n_[1], i3);
}

bool SamplingMesh::contains(const Point3& p) const {
  return p.x1 >= lo_.x1 && p.x1 <= hi_.x1 && p.x2 >= lo_.x2 && p.x2 <= hi_.x2 && p.x3 >= lo_.x3 &&
         p.x3 <= hi_.x3;
}

std::vector<std::size_t> SamplingMesh::ball(const Point3& center, double radius) const {
  std::vector<std::size_t> out;
  if (radius < 0.0) return out;
  auto bounds = [radius](double c, double lo, double h, std::size_t n) {
    const double first = std::ceil((c - radius - lo) / h - 1e-9);
    const double last = std::floor((c + radius - lo) / h + 1e-9);
    const auto top = static_cast<double>(n - 1);
    return std::pair<std::size_t, std::size_t>{static_cast<std::size_t>(std::clamp(first, 0.0, top)),
                                               static_cast<std::size_t>(std::clamp(last, 0.0, top))};
  };
  const auto [a1, b1] = bounds(center.x1, lo_.x1, h_.x1, n_[0]);
  const auto [a2, b2] = bounds(center.x2, lo_.x2, h_.x2, n_[1]);
  const auto [a3, b3] = bounds(center.x3, lo_.x3, h_.x3, n_[2]);
  const double r2 = radius * radius * (1.0 + 1e-12);
  for (std::size_t i1 = a1; i1 <= b1; ++i1)
    for (std::size_t i2 = a2; i2 <= b2; ++i2)
      for (std::size_t i3 = a3; i3 <= b3; ++i3) {
        const Point3 d = point(i1, i2, i3) - center;
        if (dot(d, d) <= r2) out.push_back(flat_index(i1, i2, i3));
      }
  return out;
}

WaveRecord::WaveRecord(ReceiverArray receivers, TimeGrid grid, RecordMeta meta)
    : receivers_(std::move(receivers)),
      grid_(grid),
      meta_(std::move(meta)),
      values_(receivers_.size() * grid_.size(), 0.0) {
  if (receivers_.positions.size() != receivers_.weights.size())
    throw InvalidArgument("WaveRecord: receiver positions and weights differ in length");
  if (receivers_.size() == 0) throw InvalidArgument("WaveRecord: no receivers");
}

std::vector<double> WaveRecord::column(std::size_t step) const {
  if (step == 0 || step > grid_.size()) throw InvalidArgument("WaveRecord: step out of range");
  std::vector<double> col(n_receivers());
  for (std::size_t m = 0; m < n_receivers(); ++m) col[m] = at(m, step);
  return col;
}

void WaveRecord::validate() const {
  if (values_.size() != n_receivers() * n_steps()) throw InvalidArgument("WaveRecord: dimension mismatch");
  for (double v : values_)
    if (!std::isfinite(v)) throw InvalidArgument("WaveRecord: non-finite entry");
}

std::string to_string(SearchMethod m) {
  switch (m) {
    case SearchMethod::Global: return "global";
    case SearchMethod::Sequential: return "sequential";
    case SearchMethod::Parallel: return "parallel";
  }
  return "global";
}

SearchMethod parse_search_method(const std::string& s) {
  if (s == "global") return SearchMethod::Global;
  if (s == "sequential") return SearchMethod::Sequential;
  if (s == "parallel") return SearchMethod::Parallel;
  throw InvalidArgument("unknown search method '" + s + "'");
}

}  // namespace mtrack
