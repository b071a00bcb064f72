#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "mtrack/errors.hpp"
#include "mtrack/trajectory.hpp"
#include "oracles.hpp"

using namespace mtrack;
constexpr double kPi = std::numbers::pi;

namespace {

void check_point(const Point3& a, const Point3& b, double tol = 1e-12) {
  CHECK(a.x1 == doctest::Approx(b.x1).epsilon(tol).scale(1.0));
  CHECK(a.x2 == doctest::Approx(b.x2).epsilon(tol).scale(1.0));
  CHECK(a.x3 == doctest::Approx(b.x3).epsilon(tol).scale(1.0));
}

// central difference of the position
Point3 numeric_velocity(const Trajectory& tr, double t, double h = 1e-6) {
  return (tr.position(t + h) - tr.position(t - h)) / (2 * h);
}

}  // namespace

TEST_CASE("built-in closed forms") {
  const auto c = builtin_trajectory("letter-C");
  const auto three = builtin_trajectory("digit-3");
  const auto eight = builtin_trajectory("digit-8");
  const auto cyl = builtin_trajectory("cyl-spiral");
  const auto cone = builtin_trajectory("cone-spiral");
  CHECK(c.terminal_time() == 10.0);
  CHECK(three.terminal_time() == 10.0);
  CHECK(eight.terminal_time() == 8.0);
  CHECK(cyl.terminal_time() == 20.0);
  CHECK(cone.terminal_time() == 20.0);
  for (double t : {0.3, 1.0, 2.9, 3.0, 4.4, 5.0, 6.6, 7.0, 7.9}) {
    const double a = 3 * kPi / 20 * t + kPi / 4;
    check_point(c.position(t), {0, 3 * std::cos(a), 3 * std::sin(a)});
    check_point(three.position(t), {0, 5 * std::abs(std::sin((t - 5) * kPi / 5)) - 2, 5 - t});
    const bool lower = t <= 3 || t > 7;
    const Point3 e8 = lower ? Point3{0, -2 * std::cos((t - 2) * kPi / 2), 2 * std::sin((t - 2) * kPi / 2) - 2}
                            : Point3{0, 2 * std::cos(kPi * t / 2), 2 * std::sin(kPi * t / 2) + 2};
    check_point(eight.position(t), e8);
    check_point(cyl.position(t), {3 * std::cos(t), 3 * std::sin(t), 0.5 * t - 5});
    check_point(cone.position(t), {0.2 * t * std::cos(t), 0.2 * t * std::sin(t), 0.5 * t - 5});
  }
}

TEST_CASE("analytic velocities match finite differences away from corners") {
  for (const auto& name : {"letter-C", "digit-3", "digit-8", "cyl-spiral", "cone-spiral"}) {
    const auto tr = builtin_trajectory(name);
    for (double t : {0.7, 1.3, 2.2, 4.1, 6.3, 7.6}) {
      if (std::string(name) == "digit-3" && std::abs(t - 5.0) < 1e-3) continue;
      check_point(tr.velocity(t), numeric_velocity(tr, t), 1e-5);
    }
  }
}

TEST_CASE("digit 8 crosses itself continuously at the branch switches") {
  const auto tr = builtin_trajectory("digit-8");
  for (double t : {3.0, 7.0}) check_point(tr.position(t), tr.position(t + 1e-9), 1e-7);
  check_point(tr.position(3.0), {0, 0, 0}, 1e-12);
}

TEST_CASE("speed bound dominates sampled speeds") {
  for (const auto& name : builtin_trajectory_names()) {
    const auto tr = builtin_trajectory(name);
    double vmax = 0.0;
    for (int i = 1; i <= 3000; ++i) vmax = std::max(vmax, norm(tr.velocity(tr.terminal_time() * i / 3000.0)));
    CHECK(tr.v_max() >= vmax);
    CHECK(tr.v_max() <= 1.02 * vmax + 1e-12);
  }
}

TEST_CASE("domain is (0, T]") {
  const auto tr = builtin_trajectory("letter-C");
  CHECK_THROWS_AS(tr.eval(0.0), DomainError);
  CHECK_THROWS_AS(tr.eval(10.000001), DomainError);
  CHECK_NOTHROW(tr.eval(10.0));
  CHECK_NOTHROW(eval_trajectory(tr, 1e-9));
  CHECK(tr.position_clamped(-3.0) == tr.position_clamped(0.0));
  CHECK(tr.position_clamped(11.0) == tr.position(10.0));
  CHECK_THROWS_AS(builtin_trajectory("letter-Q"), InvalidArgument);
}

TEST_CASE("sampled trajectories interpolate linearly with segment slopes") {
  const auto tr = Trajectory::sampled("s", {0.0, 1.0, 3.0}, {{0, 0, 0}, {1, 0, 0}, {1, 4, 0}});
  check_point(tr.position(0.5), {0.5, 0, 0});
  check_point(tr.position(2.0), {1, 2, 0});
  check_point(tr.velocity(0.5), {1, 0, 0});
  check_point(tr.velocity(1.0), {0, 2, 0});  // right-hand slope at a knot
  check_point(tr.velocity(3.0), {0, 2, 0});  // left-hand at T
  CHECK(tr.v_max() == doctest::Approx(2.0));
  CHECK_THROWS_AS(Trajectory::sampled("bad", {0.0, 0.0}, {{}, {}}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory::sampled("bad", {1.0}, {}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory::sampled("bad", {-1.0, 1.0}, {{}, {}}), InvalidArgument);
}

TEST_CASE("constant trajectory rests") {
  const auto tr = Trajectory::constant({1, 2, 3}, 5.0);
  CHECK(tr.position(0.1) == Point3{1, 2, 3});
  CHECK(tr.position(5.0) == Point3{1, 2, 3});
  CHECK(tr.v_max() == 0.0);
}

TEST_CASE("trajectory CSV round trip") {
  const auto tr = builtin_trajectory("digit-3");
  std::vector<double> times;
  for (int j = 1; j <= 50; ++j) times.push_back(0.2 * j);
  std::stringstream ss;
  write_trajectory_csv(ss, tr, times);
  const auto back = read_trajectory_csv(ss, "copy");
  REQUIRE(back.knot_times() == times);
  for (std::size_t k = 0; k < times.size(); ++k) CHECK(back.knot_points()[k] == tr.position(times[k]));
  std::stringstream bad("t,x1,x2,x3\n0.1,1,2\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad), IoError);
}

TEST_CASE("hello: stroke and connector speeds, grid-aligned connectors, inside the search cube") {
  const auto tr = builtin_trajectory("hello");
  CHECK(tr.terminal_time() == doctest::Approx(8.0));
  const auto& ts = tr.knot_times();
  const auto& ps = tr.knot_points();
  std::vector<double> connector_ends;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double v = oracle::dist(ps[k + 1], ps[k]) / (ts[k + 1] - ts[k]);
    const bool stroke = std::abs(v - 8.0) < 1e-6;
    const bool connector = std::abs(v - 80.0) < 1e-6;
    CHECK((stroke || connector));
    if (connector) connector_ends.push_back(ts[k + 1]);
  }
  REQUIRE(connector_ends.size() == 4);
  for (double t : connector_ends) CHECK(std::abs(t / 0.1 - std::round(t / 0.1)) < 1e-9);
  for (const auto& p : ps) {
    CHECK(std::abs(p.x1) <= 8.0);
    CHECK(std::abs(p.x2) <= 8.0);
    CHECK(std::abs(p.x3) <= 8.0);
  }
  CHECK(tr.v_max() == doctest::Approx(80.0 * 1.01).epsilon(1e-3));

  const auto fast = builtin_trajectory("hello", {8.0, 100.0});
  CHECK(fast.v_max() > tr.v_max());
  CHECK_THROWS_AS(builtin_trajectory("hello", {0.0, 80.0}), InvalidArgument);
}
