#include "doctest.h"

#include <cmath>

#include "flatlas/atlas.hpp"

using namespace flatlas;

namespace {

double angle_diff(double a, double b) {
  double d = a - b;
  while (d > M_PI) d -= 2 * M_PI;
  while (d < -M_PI) d += 2 * M_PI;
  return std::abs(d);
}

JetPoint car_jet(double x, double y, double theta, double xd, double yd,
                 double thetad) {
  JetPoint j(3, 1);
  j.set(0, 0, x);
  j.set(1, 0, y);
  j.set(2, 0, theta);
  j.set(0, 1, xd);
  j.set(1, 1, yd);
  j.set(2, 1, thetad);
  return j;
}

}  // namespace

TEST_CASE("chart domains") {
  Atlas a = car_atlas();
  JetPoint moving = car_jet(0, 0, 0, 1, 0, 0);
  JetPoint stopped = car_jet(0, 0, 0, 0, 0, 0);
  CHECK(chart_contains(a.chart("U1"), moving));
  CHECK_FALSE(chart_contains(a.chart("U1"), stopped));

  JetPoint turning = car_jet(0, 0, 0, 0, 0, 0.2);
  CHECK(chart_contains(a.chart("U3"), turning, 1e-6));
}

TEST_CASE("forward maps evaluate psi and its prolongations") {
  Atlas a = car_atlas();
  ImplicitSystem car = car_system();
  Rng rng(kDefaultSeed + 30);
  ExplicitSample s = sample_explicit_jet(car, 3, rng);
  s.jet.set(0, 0, 1.0);
  s.jet.set(1, 0, 2.0);
  if (chart_contains(a.chart("U1"), s.jet)) {
    JetPoint flat = forward(a.chart("U1"), s.jet, 1);
    CHECK(flat.get(0, 0) == doctest::Approx(1.0));
    CHECK(flat.get(1, 0) == doctest::Approx(2.0));
    CHECK(flat.get(0, 1) == doctest::Approx(s.jet.get(0, 1)));
  }

  JetPoint j3 = car_jet(3, 5, 0, 0.3, 0, 0.7);
  JetPoint flat3 = forward(a.chart("U3"), j3, 0);
  CHECK(flat3.get(0, 0) == doctest::Approx(0.0));
  CHECK(flat3.get(1, 0) == doctest::Approx(-5.0));

  CHECK_THROWS_WITH_AS(forward(a.chart("U1"), car_jet(0, 0, 0, 0, 1, 0), 0),
                       doctest::Contains("OutOfDomain"), Error);
}

TEST_CASE("inverse of chart 3 recovers the state") {
  Atlas a = car_atlas();
  JetPoint yj(2, 2);
  yj.set(0, 0, 0.0);   // z1
  yj.set(1, 0, -5.0);  // z2
  yj.set(0, 1, 1.0);   // z1'
  yj.set(1, 1, 3.0);   // z2'
  InverseResult r = inverse(a.chart("U3"), yj, 3);
  CHECK(r.state[0] == doctest::Approx(3.0));
  CHECK(r.state[1] == doctest::Approx(5.0));
  CHECK(r.state[2] == doctest::Approx(0.0));
}

TEST_CASE("inverse of chart 1 on a straight line") {
  Atlas a = car_atlas();
  JetPoint yj(2, 2);
  yj.set(0, 0, 0.7);  // x = t at t = 0.7
  yj.set(0, 1, 1.0);
  yj.set(1, 0, 2.0);  // y = 2
  InverseResult r = inverse(a.chart("U1"), yj, 3);
  CHECK(r.state[2] == doctest::Approx(0.0));          // theta
  CHECK(r.input[0] == doctest::Approx(1.0));          // u
  CHECK(r.input[1] == doctest::Approx(0.0));          // steering
}

TEST_CASE("inverse reports poles of the recovery map") {
  Atlas a = car_atlas();
  JetPoint yj(2, 2);  // all derivatives zero: atan2(0,0) and u = 0 poles
  yj.set(0, 0, 1.0);
  yj.set(1, 0, 2.0);
  CHECK_THROWS_WITH_AS(inverse(a.chart("U1"), yj, 3),
                       doctest::Contains("DomainError"), Error);
}

TEST_CASE("round trips: phi after psi is the identity on the zero set") {
  Atlas a = car_atlas();
  ImplicitSystem car = car_system();
  for (const Chart& c : a.charts()) {
    Rng rng(kDefaultSeed + 31);
    int done = 0;
    while (done < 100) {
      ExplicitSample s = sample_explicit_jet(car, 3, rng);
      if (!chart_contains(c, s.jet)) continue;
      JetPoint flat = forward(c, s.jet, 2);
      InverseResult r = [&] {
        try {
          return inverse(c, flat, 3);
        } catch (const Error&) {
          return InverseResult{};  // pole (e.g. u near 0); skip
        }
      }();
      if (r.state.empty()) continue;
      ++done;
      CHECK(std::abs(r.state[0] - s.jet.get(0, 0)) < 1e-9);
      CHECK(std::abs(r.state[1] - s.jet.get(1, 0)) < 1e-9);
      CHECK(angle_diff(r.state[2], s.jet.get(2, 0)) < 1e-9);
    }
  }
}

TEST_CASE("chart-3 ratio identity on the zero set") {
  // z2'/z1' = x cos theta + y sin theta
  Atlas a = car_atlas();
  ImplicitSystem car = car_system();
  Rng rng(kDefaultSeed + 32);
  int done = 0;
  while (done < 50) {
    ExplicitSample s = sample_explicit_jet(car, 2, rng);
    if (!chart_contains(a.chart("U3"), s.jet)) continue;
    JetPoint flat = forward(a.chart("U3"), s.jet, 1);
    double lhs = flat.get(1, 1) / flat.get(0, 1);
    double rhs = s.jet.get(0, 0) * std::cos(s.jet.get(2, 0)) +
                 s.jet.get(1, 0) * std::sin(s.jet.get(2, 0));
    CHECK(std::abs(lhs - rhs) < 1e-9);
    ++done;
  }
}

TEST_CASE("forward prolongation is structurally the total derivative") {
  Atlas a = car_atlas();
  for (const Chart& c : a.charts())
    for (const Expr& component : c.psi) {
      Expr level1 = cartan_apply(component);
      Expr level2 = cartan_apply(level1);
      CHECK(cartan_apply(cartan_apply(component)).same(level2));
    }
}

TEST_CASE("compatibility of all car chart pairs") {
  Atlas a = car_atlas();
  for (const Chart& ci : a.charts())
    for (const Chart& cj : a.charts()) {
      CompatReport r = compatibility_check(a, ci, cj, 32, 1e-6, kDefaultSeed);
      CAPTURE(ci.id);
      CAPTURE(cj.id);
      CAPTURE(r.max_roundtrip_residual);
      CAPTURE(r.max_prolongation_residual);
      CHECK(r.pass);
      CHECK_FALSE(r.no_overlap);
    }
}

TEST_CASE("compatibility detects a corrupted recovery map") {
  Atlas good = car_atlas();
  std::vector<Chart> charts = good.charts();
  for (Chart& c : charts)
    if (c.id == "U3") c.phi[1] = -c.phi[1];  // wrong sign on the y recovery
  Atlas bad(good.system_ptr(), charts);
  CompatReport r =
      compatibility_check(bad, bad.chart("U1"), bad.chart("U3"), 32, 1e-6);
  CHECK_FALSE(r.pass);
}

TEST_CASE("compatibility is identical under serial and parallel execution") {
  Atlas a = car_atlas();
  CompatReport s = compatibility_check(a, a.chart("U1"), a.chart("U3"), 24, 1e-6,
                                       kDefaultSeed, Execution::Serial);
  CompatReport p = compatibility_check(a, a.chart("U1"), a.chart("U3"), 24, 1e-6,
                                       kDefaultSeed, Execution::Parallel);
  CHECK(s.samples_used == p.samples_used);
  CHECK(s.max_roundtrip_residual == p.max_roundtrip_residual);
  CHECK(s.max_prolongation_residual == p.max_prolongation_residual);
}

TEST_CASE("chart selection with hysteresis") {
  Atlas a = car_atlas();
  CHECK(select_chart(a, car_jet(0, 0, 0, 1, 0, 0), std::string("U1")) == "U1");
  CHECK(select_chart(a, car_jet(0, 0, 0, 0, 1, 0), std::string("U1")) == "U2");
  CHECK_THROWS_WITH_AS(
      select_chart(a, car_jet(0, 0, 0, 0, 0, 0), std::nullopt),
      doctest::Contains("NoChartAvailable"), Error);

  // deterministic: repeated calls agree
  for (int i = 0; i < 3; ++i)
    CHECK(select_chart(a, car_jet(0, 0, 1.3, 0.4, 0.7, 0.2), std::nullopt) ==
          select_chart(a, car_jet(0, 0, 1.3, 0.4, 0.7, 0.2), std::nullopt));

  // margin above eps but below the switching bar: stays unavailable
  CHECK_THROWS_AS(select_chart(a, car_jet(0, 0, 0, 5e-6, 0, 0), std::string("U2"),
                               1e-6, 10.0),
                  Error);
}

TEST_CASE("classification of car jets") {
  Atlas a = car_atlas();

  Classification c1 = classify_point(a, car_jet(0, 0, 0, 1, 0, 0));
  CHECK(c1.status == PointStatus::Regular);
  REQUIRE(c1.chart_ids.size() == 1);
  CHECK(c1.chart_ids[0] == "U1");

  Classification c2 = classify_point(a, car_jet(0, 0, 0, 0, 2, 0));
  CHECK(c2.status == PointStatus::Regular);
  REQUIRE(c2.chart_ids.size() == 1);
  CHECK(c2.chart_ids[0] == "U2");

  Classification eq = classify_point(a, car_jet(4, -1, 0.7, 0, 0, 0));
  CHECK(eq.status == PointStatus::CandidateIntrinsic);
  CHECK(is_equilibrium(car_jet(4, -1, 0.7, 0, 0, 0)));

  Classification fib = classify_point(a, car_jet(0, 0, 0, 0, 0, 1));
  CHECK(fib.status == PointStatus::OutsideFiber);
}

TEST_CASE("atlas covers the zero set away from equilibria") {
  Atlas a = car_atlas();
  ImplicitSystem car = car_system();
  Rng rng(kDefaultSeed + 33);
  std::vector<JetPoint> jets;
  while (jets.size() < 200) {
    ExplicitSample s = sample_explicit_jet(car, 2, rng);
    double mx = std::max({std::abs(s.jet.get(0, 1)), std::abs(s.jet.get(1, 1)),
                          std::abs(s.jet.get(2, 1))});
    if (mx > 1e-3) jets.push_back(s.jet);
  }
  auto serial = classify_points(a, jets, kDefaultDomainEps, 1e-9, Execution::Serial);
  auto parallel =
      classify_points(a, jets, kDefaultDomainEps, 1e-9, Execution::Parallel);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].status == PointStatus::Regular);
    CHECK_FALSE(serial[i].chart_ids.empty());
    CHECK(serial[i].status == parallel[i].status);
    CHECK(serial[i].chart_ids == parallel[i].chart_ids);
  }
}

TEST_CASE("angle recovery agrees across charts 1 and 2 on the overlap") {
  Atlas a = car_atlas();
  ImplicitSystem car = car_system();
  Rng rng(kDefaultSeed + 34);
  int done = 0;
  while (done < 50) {
    ExplicitSample s = sample_explicit_jet(car, 3, rng);
    if (!chart_contains(a.chart("U1"), s.jet) ||
        !chart_contains(a.chart("U2"), s.jet))
      continue;
    JetPoint y1 = forward(a.chart("U1"), s.jet, 2);
    JetPoint y2 = forward(a.chart("U2"), s.jet, 2);
    double t1 = inverse(a.chart("U1"), y1, 3).state[2];
    double t2 = inverse(a.chart("U2"), y2, 3).state[2];
    CHECK(angle_diff(t1, t2) < 1e-9);
    ++done;
  }
}

TEST_CASE("atlas JSON round trip") {
  Atlas a = car_atlas();
  std::string text = atlas_to_json(a);
  auto sys = std::make_shared<const ImplicitSystem>(car_system());
  Atlas back = atlas_from_json(text, sys);
  REQUIRE(back.charts().size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.charts()[i].id == a.charts()[i].id);
    for (std::size_t k = 0; k < a.charts()[i].phi.size(); ++k)
      CHECK(back.charts()[i].phi[k].same(a.charts()[i].phi[k]));
  }
  CHECK_THROWS_AS(atlas_from_json("{}", sys), Error);
  CHECK(load_atlas("car-atlas").charts().size() == 3);
  CHECK_THROWS_AS(load_atlas("no-such-atlas.json"), Error);
}
