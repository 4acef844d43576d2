#include "doctest.h"

#include <cmath>
#include <sstream>

#include "flatlas/planner.hpp"

using namespace flatlas;

namespace {

// Exact flat samples of a circle of radius r at unit speed.
std::vector<FlatSample> circle_samples(double r, double t_end, double dt) {
  std::vector<FlatSample> out;
  for (double t = 0; t <= t_end + 1e-12; t += dt) {
    FlatSample f;
    f.t = t;
    f.s = t;
    f.x = r * std::cos(t / r);
    f.y = r * std::sin(t / r);
    f.xd = -std::sin(t / r);
    f.yd = std::cos(t / r);
    f.xdd = -std::cos(t / r) / r;
    f.ydd = -std::sin(t / r) / r;
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_CASE("spline through two points is the chord") {
  ParamCurve c = fit_splines({{0, 0}, {1, 0}});
  CHECK(c.p_end() == doctest::Approx(1.0));
  CHECK(c.x(0.5) == doctest::Approx(0.5));
  CHECK(c.y(0.5) == doctest::Approx(0.0));
  CHECK(c.x(0.5, 2) == doctest::Approx(0.0));
}

TEST_CASE("natural spline interpolates and has natural ends") {
  std::vector<std::array<double, 2>> wps{{0, 0}, {1, 1}, {2, 0}};
  ParamCurve c = fit_splines(wps);
  // knots at chord-length accumulation
  double h = std::sqrt(2.0);
  CHECK(c.x(0) == doctest::Approx(0));
  CHECK(c.y(0) == doctest::Approx(0));
  CHECK(c.x(h) == doctest::Approx(1));
  CHECK(c.y(h) == doctest::Approx(1));
  CHECK(c.x(2 * h) == doctest::Approx(2));
  CHECK(c.y(2 * h) == doctest::Approx(0));
  // natural ends: second derivative vanishes
  CHECK(c.y(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.y(2 * h, 2) == doctest::Approx(0.0).epsilon(1e-12));
  // tridiagonal oracle for the middle second derivative: M1 = -3/2
  CHECK(c.y(h, 2) == doctest::Approx(-1.5));
  // C1 continuity at the interior knot
  CHECK(c.y(h - 1e-9, 1) == doctest::Approx(c.y(h + 1e-9, 1)).epsilon(1e-6));

  CHECK_THROWS_WITH_AS(fit_splines({{0, 0}}), doctest::Contains("Degenerate"),
                       Error);
  CHECK_THROWS_AS(fit_splines({{0, 0}, {0, 0}}), Error);
}

TEST_CASE("arc length of the 3-4-5 segment") {
  PlanarCurve c = arc_length_reparam(fit_splines({{0, 0}, {3, 4}}));
  CHECK(c.length() == doctest::Approx(5.0).epsilon(1e-12));
  auto p = c.position(2.5);
  CHECK(p[0] == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(2.0).epsilon(1e-9));
  auto d = c.derivative(2.5);
  CHECK(d[0] == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(d[1] == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("arc length of a dense quarter circle") {
  std::vector<std::array<double, 2>> wps;
  const int nw = 50;
  for (int i = 0; i <= nw; ++i) {
    double a = M_PI / 2 * i / nw;
    wps.push_back({2 * std::cos(a), 2 * std::sin(a)});
  }
  PlanarCurve c = arc_length_reparam(fit_splines(wps));
  CHECK(std::abs(c.length() - M_PI) < 1e-3);
}

TEST_CASE("unit speed after reparametrization") {
  RouteSpec demo = demo_route();
  PlanarCurve c = arc_length_reparam(fit_splines(demo.waypoints));
  for (int i = 0; i <= 1000; ++i) {
    double s = c.length() * i / 1000;
    auto d = c.derivative(s);
    CHECK(std::abs(std::hypot(d[0], d[1]) - 1.0) < 1e-6);
  }
}

TEST_CASE("reparametrization rejects singular curves") {
  // doubling back creates a cusp with vanishing speed
  CHECK_THROWS_WITH_AS(
      arc_length_reparam(fit_splines({{0, 0}, {1, 0}, {0, 0.001}})),
      doctest::Contains("SingularParametrization"), Error);
}

TEST_CASE("triangular speed profile matches the closed form") {
  TimeScaling ts = build_sigma({{1.0, 1.0}}, 1.0);
  CHECK(ts.duration() == doctest::Approx(2.0));
  CHECK(ts.sigma_dot(0.0) == 0.0);
  CHECK(ts.sigma_dot(2.0) == 0.0);
  CHECK(ts.sigma(1.0) == doctest::Approx(0.5));
  for (double t : {0.2, 0.5, 0.9}) CHECK(ts.sigma(t) == doctest::Approx(t * t / 2));
  for (double t : {1.1, 1.5, 1.9})
    CHECK(ts.sigma(t) == doctest::Approx(1.0 - (2 - t) * (2 - t) / 2));
  CHECK(ts.sigma(2.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sigma construction rejects an empty route") {
  CHECK_THROWS_WITH_AS(build_sigma({{1.0, 1.0}}, 0.0),
                       doctest::Contains("InfeasibleProfile"), Error);
}

TEST_CASE("two equal segments join with continuous speed") {
  TimeScaling ts = build_sigma({{0.5, 1.0}, {1.0, 1.0}}, 2.0);
  CHECK(ts.sigma(ts.duration()) == doctest::Approx(2.0).epsilon(1e-9));
  // continuity of sigma_dot at every breakpoint
  for (const auto& p : ts.pieces()) {
    if (p.t0 == 0.0) continue;
    CHECK(ts.sigma_dot(p.t0 - 1e-12) == doctest::Approx(p.v0).epsilon(1e-9));
  }
  // single-segment equivalent gives the same triangle
  TimeScaling single = build_sigma({{1.0, 1.0}}, 2.0);
  CHECK(single.duration() == doctest::Approx(ts.duration()));
  for (double t = 0; t <= ts.duration(); t += 0.25)
    CHECK(single.sigma(t) == doctest::Approx(ts.sigma(t)).epsilon(1e-12));
}

TEST_CASE("fixed ramp rate creates plateaus and can be infeasible") {
  TimeScaling ts = build_sigma({{1.0, 1.0}}, 4.0, 1.0);
  // ramp 0->1 in 1 s, plateau 3 m, ramp down: T = 1 + 3 + 1
  CHECK(ts.duration() == doctest::Approx(5.0));
  CHECK(ts.sigma_dot(2.5) == doctest::Approx(1.0));
  CHECK(ts.sigma_ddot(2.5) == doctest::Approx(0.0));

  CHECK_THROWS_WITH_AS(build_sigma({{1.0, 2.0}}, 1.0, 0.5),
                       doctest::Contains("InfeasibleProfile"), Error);
}

TEST_CASE("sigma monotone with continuous derivative on the demo profile") {
  RouteSpec demo = demo_route();
  PlanarCurve c = arc_length_reparam(fit_splines(demo.waypoints));
  TimeScaling ts = build_sigma(demo.speed_segments, c.length());
  CHECK(ts.sigma(ts.duration()) == doctest::Approx(c.length()).epsilon(1e-9));
  double prev = -1;
  for (int i = 0; i <= 2000; ++i) {
    double t = ts.duration() * i / 2000;
    CHECK(ts.sigma_dot(t) >= 0.0);
    double s = ts.sigma(t);
    CHECK(s >= prev - 1e-12);
    prev = s;
  }
  for (const auto& p : ts.pieces()) {
    if (p.t0 == 0.0) continue;
    CHECK(std::abs(ts.sigma_dot(p.t0 - 1e-13) - p.v0) < 1e-12);
  }
}

TEST_CASE("composition applies the chain rule") {
  // (0,0) -> (3,4): straight 3-4-5 line, triangular profile
  PlanarCurve c = arc_length_reparam(fit_splines({{0, 0}, {3, 4}}));
  TimeScaling ts = build_sigma({{1.0, 1.0}}, c.length());
  auto flat = compose_trajectory(c, ts, 0.01);
  CHECK(flat.front().t == 0.0);
  CHECK(flat.front().xd == doctest::Approx(0.0));  // sigma_dot(0) = 0
  CHECK(flat.front().yd == doctest::Approx(0.0));

  // peak speed at t = T/2: velocity along (3/5, 4/5), magnitude 1
  double tpk = ts.duration() / 2;
  const FlatSample* peak = nullptr;
  for (const auto& f : flat)
    if (!peak || std::abs(f.t - tpk) < std::abs(peak->t - tpk)) peak = &f;
  REQUIRE(peak);
  CHECK(peak->xd == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(peak->yd == doctest::Approx(0.8).epsilon(1e-9));

  // plateau on a line: zero acceleration
  TimeScaling fixed = build_sigma({{1.0, 1.0}}, c.length(), 1.0);
  auto flat2 = compose_trajectory(c, fixed, 0.01);
  for (const auto& f : flat2)
    if (f.t > 1.5 && f.t < 3.0) {
      CHECK(f.xdd == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(f.ydd == doctest::Approx(0.0).epsilon(1e-9));
    }

  auto serial = compose_trajectory(c, ts, 0.01, Execution::Serial);
  REQUIRE(serial.size() == flat.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].x == flat[i].x);
    CHECK(serial[i].xdd == flat[i].xdd);
  }
}

TEST_CASE("lift of a straight line") {
  Atlas a = car_atlas();
  RouteSpec r;
  r.waypoints = {{0, 0}, {10, 0}};
  r.speed_segments = {{1.0, 1.0}};
  Trajectory traj = plan_route(r, a);
  int checked = 0;
  for (const auto& s : traj.samples) {
    if (s.excluded) continue;
    CHECK(std::abs(s.theta) < 1e-12);
    CHECK(std::abs(s.thetad) < 1e-12);
    CHECK(std::abs(s.phi) < 1e-12);
    ++checked;
  }
  CHECK(checked > 100);
  CHECK(traj.samples.front().excluded);  // u = 0 at t = 0
  CHECK(traj.samples.back().excluded);
  CHECK(traj.excluded_intervals.size() == 2);
}

TEST_CASE("lift of exact circular motion") {
  Atlas a = car_atlas();  // l = 2
  const double r = 2.0;
  Trajectory traj = lift_trajectory(circle_samples(r, 6.0, 0.01), a);
  for (const auto& s : traj.samples) {
    REQUIRE_FALSE(s.excluded);
    CHECK(std::abs(s.u - 1.0) < 1e-12);
    CHECK(std::abs(s.thetad - 1.0 / r) < 1e-12);
    CHECK(std::abs(s.phi - std::atan(2.0 / r)) < 1e-9);
  }
  // theta is continuously unwrapped past pi
  for (std::size_t i = 1; i < traj.samples.size(); ++i)
    CHECK(std::abs(traj.samples[i].theta - traj.samples[i - 1].theta) < M_PI);
  CHECK(traj.samples.back().theta > M_PI);  // wrapped past the branch cut
}

TEST_CASE("lift aborts on an interior sample with no usable chart") {
  Atlas a = car_atlas();
  std::vector<FlatSample> flat = circle_samples(2.0, 1.0, 0.01);
  FlatSample bad;
  bad.t = 0.5;
  bad.x = 1;
  bad.y = 1;
  bad.xd = 3.5e-6;
  bad.yd = 3.5e-6;  // u ~ 5e-6: above eps, below every chart margin bar
  std::size_t mid = flat.size() / 2;
  bad.t = flat[mid].t;
  flat[mid] = bad;
  CHECK_THROWS_WITH_AS(lift_trajectory(flat, a, 1e-6),
                       doctest::Contains("NoChartAvailable"), Error);
}

TEST_CASE("closed-loop replay of a straight line is exact") {
  Atlas a = car_atlas();
  RouteSpec r;
  r.waypoints = {{0, 0}, {10, 0}};
  r.speed_segments = {{1.0, 1.0}};
  Trajectory traj = plan_route(r, a);
  ReplayReport rep = validate_closed_loop(traj, car_system(), 1e-3);
  CHECK(rep.max_position_error < 1e-9);
  CHECK(rep.f_residual_max < 1e-12);
}

TEST_CASE("closed-loop replay converges at fourth order on the circle") {
  Atlas a = car_atlas();
  const double r = 0.5;  // tight circle exercises the rotation coupling
  std::vector<FlatSample> flat = circle_samples(r, 3.0, 0.01);
  Trajectory traj = lift_trajectory(flat, a);
  ImplicitSystem car = car_system();
  double e1 = validate_closed_loop(traj, car, 0.08).max_position_error;
  double e2 = validate_closed_loop(traj, car, 0.04).max_position_error;
  double e3 = validate_closed_loop(traj, car, 0.02).max_position_error;
  CAPTURE(e1);
  CAPTURE(e2);
  CAPTURE(e3);
  CHECK(e1 / e2 > 8.0);
  CHECK(e1 / e2 < 32.0);
  CHECK(e2 / e3 > 8.0);
  CHECK(e2 / e3 < 32.0);
}

TEST_CASE("replay of an all-excluded trajectory is empty") {
  Trajectory traj;
  TrajectorySample s;
  s.excluded = true;
  traj.samples = {s, s};
  ReplayReport rep = validate_closed_loop(traj, car_system(), 1e-3);
  CHECK(rep.samples_compared == 0);
}

TEST_CASE("replay rejects excluded interior samples") {
  Atlas a = car_atlas();
  Trajectory traj = lift_trajectory(circle_samples(2.0, 2.0, 0.01), a);
  traj.samples[traj.samples.size() / 2].excluded = true;
  CHECK_THROWS_WITH_AS(validate_closed_loop(traj, car_system(), 1e-3),
                       doctest::Contains("excluded interior"), Error);
}

TEST_CASE("demo route pipeline invariants") {
  Atlas a = car_atlas();
  RouteSpec demo = demo_route();
  Trajectory traj = plan_route(demo, a);
  REQUIRE(traj.samples.size() > 1000);

  double prev_t = -1;
  double prev_theta = 0;
  bool have_prev_theta = false;
  std::set<std::string> charts_used;
  for (const auto& s : traj.samples) {
    CHECK(s.t > prev_t);
    prev_t = s.t;
    if (s.excluded) continue;
    // F-residual vanishes structurally
    CHECK(std::abs(s.xd * std::sin(s.theta) - s.yd * std::cos(s.theta)) < 1e-9);
    if (have_prev_theta) CHECK(std::abs(s.theta - prev_theta) < M_PI);
    prev_theta = s.theta;
    have_prev_theta = true;
    charts_used.insert(s.chart_id);
  }
  // the route exercises the whole atlas
  CHECK(charts_used.count("U1"));
  CHECK(charts_used.count("U2"));
  CHECK(charts_used.count("U3"));

  // endpoints excluded where the speed vanishes
  CHECK(traj.samples.front().excluded);
  CHECK(traj.samples.back().excluded);
}

TEST_CASE("trajectory CSV round trip") {
  Atlas a = car_atlas();
  Trajectory traj = lift_trajectory(circle_samples(2.0, 1.0, 0.05), a);
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  std::istringstream is(os.str());
  Trajectory back = read_trajectory_csv(is);
  REQUIRE(back.samples.size() == traj.samples.size());
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    CHECK(back.samples[i].t == traj.samples[i].t);
    CHECK(back.samples[i].phi == traj.samples[i].phi);
    CHECK(back.samples[i].chart_id == traj.samples[i].chart_id);
    CHECK(back.samples[i].excluded == traj.samples[i].excluded);
  }

  std::istringstream bad("not,a,header\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad), Error);
  std::istringstream truncated(
      "t,s,x,y,xdot,ydot,xddot,yddot,theta,thetadot,u,phi,chart_id,excluded\n"
      "0,0,1\n");
  CHECK_THROWS_AS(read_trajectory_csv(truncated), Error);
}

TEST_CASE("route JSON round trip and validation") {
  RouteSpec demo = demo_route();
  RouteSpec back = route_from_json(route_to_json(demo));
  CHECK(back.waypoints.size() == demo.waypoints.size());
  CHECK(back.speed_segments.size() == demo.speed_segments.size());
  CHECK(back.car_length == demo.car_length);

  RouteSpec bad;
  bad.waypoints = {{0, 0}};
  bad.speed_segments = {{1.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), Error);

  RouteSpec bad2 = demo;
  bad2.speed_segments = {{0.5, 1.0}};  // does not end at 1
  CHECK_THROWS_AS(bad2.validate(), Error);

  CHECK_THROWS_AS(route_from_json("{}"), Error);
  CHECK(load_route("demo").waypoints.size() == demo.waypoints.size());
}
