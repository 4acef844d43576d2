#include "flatlas/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace flatlas {

void RouteSpec::validate() const {
  if (waypoints.size() < 2)
    raise(ErrorKind::DegenerateWaypoints, "need at least two waypoints");
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    double dx = waypoints[i][0] - waypoints[i - 1][0];
    double dy = waypoints[i][1] - waypoints[i - 1][1];
    if (std::hypot(dx, dy) < 1e-12)
      raise(ErrorKind::DegenerateWaypoints,
            "consecutive waypoints " + std::to_string(i - 1) + ", " +
                std::to_string(i) + " coincide");
  }
  if (speed_segments.empty())
    raise(ErrorKind::Precondition, "need at least one speed segment");
  double prev = 0.0;
  for (const SpeedSegment& s : speed_segments) {
    if (s.arc_fraction_end <= prev || s.arc_fraction_end > 1.0 + 1e-12)
      raise(ErrorKind::Precondition, "arc fractions must increase within (0, 1]");
    if (s.target_speed <= 0)
      raise(ErrorKind::Precondition, "target speeds must be positive");
    prev = s.arc_fraction_end;
  }
  if (std::abs(prev - 1.0) > 1e-12)
    raise(ErrorKind::Precondition, "last arc fraction must equal 1");
  if (car_length <= 0) raise(ErrorKind::Precondition, "car length must be positive");
  if (sample_dt <= 0) raise(ErrorKind::Precondition, "sample_dt must be positive");
}

// ---- splines -------------------------------------------------------------

ParamCurve::ParamCurve(std::vector<double> knots,
                       std::vector<std::array<double, 4>> x_coef,
                       std::vector<std::array<double, 4>> y_coef)
    : knots_(std::move(knots)), x_(std::move(x_coef)), y_(std::move(y_coef)) {}

double ParamCurve::eval(const std::vector<std::array<double, 4>>& c, double p,
                        int der) const {
  std::size_t lo = 0, hi = knots_.size() - 1;
  p = std::clamp(p, knots_.front(), knots_.back());
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (knots_[mid] <= p)
      lo = mid;
    else
      hi = mid;
  }
  double u = p - knots_[lo];
  const auto& a = c[lo];
  switch (der) {
    case 0: return a[0] + u * (a[1] + u * (a[2] + u * a[3]));
    case 1: return a[1] + u * (2 * a[2] + 3 * u * a[3]);
    case 2: return 2 * a[2] + 6 * u * a[3];
    default: return 6 * a[3];
  }
}

double ParamCurve::x(double p, int der) const { return eval(x_, p, der); }
double ParamCurve::y(double p, int der) const { return eval(y_, p, der); }
double ParamCurve::speed(double p) const { return std::hypot(x(p, 1), y(p, 1)); }

namespace {

// Natural cubic spline through (knots, values): second-derivative
// formulation with a Thomas solve.
std::vector<std::array<double, 4>> natural_spline(const std::vector<double>& t,
                                                  const std::vector<double>& v) {
  const std::size_t n = t.size();
  std::vector<double> m(n, 0.0);  // second derivatives, natural ends
  if (n > 2) {
    std::vector<double> a(n, 0), b(n, 0), c(n, 0), d(n, 0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
      a[i] = h0 / 6;
      b[i] = (h0 + h1) / 3;
      c[i] = h1 / 6;
      d[i] = (v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0;
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
      double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
      if (i == 1) break;
    }
  }
  std::vector<std::array<double, 4>> out(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double h = t[i + 1] - t[i];
    double b1 = (v[i + 1] - v[i]) / h - h * (2 * m[i] + m[i + 1]) / 6;
    out[i] = {v[i], b1, m[i] / 2, (m[i + 1] - m[i]) / (6 * h)};
  }
  return out;
}

}  // namespace

ParamCurve fit_splines(const std::vector<std::array<double, 2>>& waypoints) {
  if (waypoints.size() < 2)
    raise(ErrorKind::DegenerateWaypoints, "need at least two waypoints");
  std::vector<double> knots{0.0}, xs, ys;
  for (const auto& w : waypoints) {
    xs.push_back(w[0]);
    ys.push_back(w[1]);
  }
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    double chord = std::hypot(xs[i] - xs[i - 1], ys[i] - ys[i - 1]);
    if (chord < 1e-12)
      raise(ErrorKind::DegenerateWaypoints, "coincident consecutive waypoints");
    knots.push_back(knots.back() + chord);
  }
  return ParamCurve(knots, natural_spline(knots, xs), natural_spline(knots, ys));
}

// ---- arc length ----------------------------------------------------------

namespace {

double simpson(const ParamCurve& c, double a, double b, int panels = 4) {
  double h = (b - a) / (2 * panels);
  double acc = c.speed(a) + c.speed(b);
  for (int i = 1; i < 2 * panels; ++i)
    acc += c.speed(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

PlanarCurve::PlanarCurve(ParamCurve base, double length, std::vector<double> s_table,
                         std::vector<double> p_table)
    : base_(std::move(base)), length_(length), s_table_(std::move(s_table)),
      p_table_(std::move(p_table)) {}

double PlanarCurve::param_of_arc(double s) const {
  s = std::clamp(s, 0.0, length_);
  std::size_t lo = 0, hi = s_table_.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (s_table_[mid] <= s)
      lo = mid;
    else
      hi = mid;
  }
  double p = p_table_[lo];
  double p_lo = p_table_[lo], p_hi = p_table_[hi];
  for (int it = 0; it < 40; ++it) {
    double f = s_table_[lo] + simpson(base_, p_table_[lo], p) - s;
    double v = base_.speed(p);
    if (std::abs(f) < 1e-13) break;
    double step = f / v;
    double next = p - step;
    if (next < p_lo || next > p_hi)  // safeguard: bisection fallback
      next = f > 0 ? (p + p_lo) / 2 : (p + p_hi) / 2;
    if (f > 0)
      p_hi = p;
    else
      p_lo = p;
    if (std::abs(next - p) < 1e-15 * std::max(1.0, std::abs(p))) {
      p = next;
      break;
    }
    p = next;
  }
  return p;
}

std::array<double, 2> PlanarCurve::position(double s) const {
  double p = param_of_arc(s);
  return {base_.x(p), base_.y(p)};
}

std::array<double, 2> PlanarCurve::derivative(double s) const {
  double p = param_of_arc(s);
  double v = base_.speed(p);
  return {base_.x(p, 1) / v, base_.y(p, 1) / v};
}

std::array<double, 2> PlanarCurve::second_derivative(double s) const {
  double p = param_of_arc(s);
  double xp = base_.x(p, 1), yp = base_.y(p, 1);
  double xpp = base_.x(p, 2), ypp = base_.y(p, 2);
  double v = std::hypot(xp, yp);
  double vp = (xp * xpp + yp * ypp) / v;
  return {(xpp - xp * vp / v) / (v * v), (ypp - yp * vp / v) / (v * v)};
}

PlanarCurve arc_length_reparam(const ParamCurve& curve) {
  const int n = 4096;
  const double p_end = curve.p_end();
  std::vector<double> p_table(n + 1), s_table(n + 1);
  for (int i = 0; i <= n; ++i) {
    double p = p_end * i / n;
    p_table[static_cast<std::size_t>(i)] = p;
    if (curve.speed(p) < 1e-9)
      raise(ErrorKind::SingularParametrization,
            "curve speed vanishes at parameter " + std::to_string(p));
  }
  s_table[0] = 0.0;
  for (int i = 1; i <= n; ++i)
    s_table[static_cast<std::size_t>(i)] =
        s_table[static_cast<std::size_t>(i - 1)] +
        simpson(curve, p_table[static_cast<std::size_t>(i - 1)],
                p_table[static_cast<std::size_t>(i)]);
  double length = s_table.back();
  return PlanarCurve(curve, length, std::move(s_table), std::move(p_table));
}

// ---- time scaling ----------------------------------------------------------

TimeScaling::TimeScaling(std::vector<Piece> pieces, double duration, double length)
    : pieces_(std::move(pieces)), T_(duration), L_(length) {
  if (pieces_.empty()) raise(ErrorKind::InfeasibleProfile, "empty time scaling");
}

const TimeScaling::Piece& TimeScaling::piece_at(double t) const {
  std::size_t lo = 0, hi = pieces_.size();
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (pieces_[mid].t0 <= t)
      lo = mid;
    else
      hi = mid;
  }
  return pieces_[lo];
}

double TimeScaling::sigma(double t) const {
  t = std::clamp(t, 0.0, T_);
  const Piece& p = piece_at(t);
  double tau = t - p.t0;
  return p.s0 + tau * (p.v0 + tau * p.a / 2);
}

double TimeScaling::sigma_dot(double t) const {
  t = std::clamp(t, 0.0, T_);
  const Piece& p = piece_at(t);
  return p.v0 + (t - p.t0) * p.a;
}

double TimeScaling::sigma_ddot(double t) const {
  t = std::clamp(t, 0.0, T_);
  return piece_at(t).a;
}

TimeScaling build_sigma(const std::vector<SpeedSegment>& segments, double length,
                        std::optional<double> ramp_rate) {
  if (length <= 0) raise(ErrorKind::InfeasibleProfile, "route has zero length");
  const std::size_t N = segments.size();
  if (N == 0) raise(ErrorKind::InfeasibleProfile, "no speed segments");

  // Junction speeds: zero at both route ends, the smaller neighbor inside.
  std::vector<double> enter(N), exit(N);
  for (std::size_t i = 0; i < N; ++i) {
    enter[i] = i == 0 ? 0.0 : std::min(segments[i - 1].target_speed,
                                       segments[i].target_speed);
    exit[i] = i + 1 == N ? 0.0 : std::min(segments[i].target_speed,
                                          segments[i + 1].target_speed);
  }

  std::vector<TimeScaling::Piece> pieces;
  double t = 0.0, s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double s_end = segments[i].arc_fraction_end * length;
    double ell = s_end - s;
    if (ell <= 0)
      raise(ErrorKind::InfeasibleProfile, "segment " + std::to_string(i) +
                                              " has non-positive length");
    double v = segments[i].target_speed;
    double a0 = enter[i], b0 = exit[i];
    double need = (v * v - a0 * a0) / 2 + (v * v - b0 * b0) / 2;  // R * ramp area
    double rate;
    if (need <= 0) {
      rate = 0.0;  // constant-speed segment
    } else if (ramp_rate) {
      rate = *ramp_rate;
      if (need / rate > ell + 1e-12)
        raise(ErrorKind::InfeasibleProfile,
              "segment " + std::to_string(i) +
                  " too short to reach its target speed at the configured ramp rate");
    } else {
      rate = need / ell;  // minimal feasible rate: ramps fill the segment
    }

    if (rate == 0.0) {
      pieces.push_back({t, s, v, 0.0});
      t += ell / v;
      s = s_end;
      continue;
    }
    double t_up = (v - a0) / rate;
    double t_dn = (v - b0) / rate;
    double plateau = (ell - need / rate) / v;
    if (t_up > 0) {
      pieces.push_back({t, s, a0, rate});
      t += t_up;
      s += (a0 + v) / 2 * t_up;
    }
    if (plateau > 1e-12) {
      pieces.push_back({t, s, v, 0.0});
      t += plateau;
      s += v * plateau;
    }
    if (t_dn > 0) {
      pieces.push_back({t, s, v, -rate});
      t += t_dn;
      s += (v + b0) / 2 * t_dn;
    }
    s = s_end;  // pin accumulated arc to the exact boundary
  }
  return TimeScaling(std::move(pieces), t, length);
}

// ---- composition -----------------------------------------------------------

std::vector<FlatSample> compose_trajectory(const PlanarCurve& curve,
                                           const TimeScaling& ts, double dt,
                                           Execution exec) {
  if (dt <= 0) raise(ErrorKind::Precondition, "dt must be positive");
  std::vector<double> ticks;
  for (std::size_t k = 0; k * dt < ts.duration(); ++k) ticks.push_back(k * dt);
  for (const auto& p : ts.pieces()) ticks.push_back(p.t0);
  ticks.push_back(ts.duration());
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end(),
                          [&](double a, double b) { return b - a < 1e-12; }),
              ticks.end());

  std::vector<FlatSample> out(ticks.size());
  for_each_index(ticks.size(), exec, [&](std::size_t i) {
    double t = ticks[i];
    double s = ts.sigma(t), sd = ts.sigma_dot(t), sdd = ts.sigma_ddot(t);
    auto pos = curve.position(s);
    auto d1 = curve.derivative(s);
    auto d2 = curve.second_derivative(s);
    FlatSample& f = out[i];
    f.t = t;
    f.s = s;
    f.x = pos[0];
    f.y = pos[1];
    f.xd = d1[0] * sd;
    f.yd = d1[1] * sd;
    f.xdd = d2[0] * sd * sd + d1[0] * sdd;
    f.ydd = d2[1] * sd * sd + d1[1] * sdd;
  });
  return out;
}

// ---- lifting ---------------------------------------------------------------

namespace {

const Chart& position_chart(const Atlas& atlas) {
  for (const Chart& c : atlas.charts())
    if (c.psi.size() == 2 && c.psi[0].same(Expr::var(0, 0)) &&
        c.psi[1].same(Expr::var(1, 0)))
      return c;
  raise(ErrorKind::Precondition,
        "atlas has no chart with the position pair as flat output");
}

Binding flat_binding(const FlatSample& f) {
  Binding b;
  b.set(0, 0, f.x);
  b.set(1, 0, f.y);
  b.set(0, 1, f.xd);
  b.set(1, 1, f.yd);
  b.set(0, 2, f.xdd);
  b.set(1, 2, f.ydd);
  return b;
}

}  // namespace

Trajectory lift_trajectory(const std::vector<FlatSample>& flat, const Atlas& atlas,
                           double eps) {
  if (eps <= 0) raise(ErrorKind::Precondition, "eps must be positive");
  const Chart& xy_chart = position_chart(atlas);
  const int n = atlas.system().n();

  Trajectory traj;
  traj.samples.resize(flat.size());
  if (flat.empty()) return traj;
  traj.length = flat.back().s;

  // Hysteresis and unwrapping are sequential by contract.
  std::optional<std::string> current;
  double last_theta = 0.0;
  bool theta_defined = false;

  for (std::size_t i = 0; i < flat.size(); ++i) {
    const FlatSample& f = flat[i];
    TrajectorySample& s = traj.samples[i];
    s.t = f.t;
    s.s = f.s;
    s.x = f.x;
    s.y = f.y;
    s.xd = f.xd;
    s.yd = f.yd;
    s.xdd = f.xdd;
    s.ydd = f.ydd;
    s.u = std::hypot(f.xd, f.yd);

    if (s.u < eps) {
      s.excluded = true;
      s.theta = theta_defined ? last_theta : 0.0;
      current.reset();
      continue;
    }

    double raw = std::atan2(f.yd, f.xd);
    double theta = theta_defined
                       ? raw + 2 * M_PI * std::round((last_theta - raw) / (2 * M_PI))
                       : raw;
    double u2 = f.xd * f.xd + f.yd * f.yd;
    double thetad = (f.ydd * f.xd - f.xdd * f.yd) / u2;

    JetPoint jet(n, 1);
    jet.set(0, 0, f.x);
    jet.set(1, 0, f.y);
    jet.set(2, 0, theta);
    jet.set(0, 1, f.xd);
    jet.set(1, 1, f.yd);
    jet.set(2, 1, thetad);
    try {
      s.chart_id = select_chart(atlas, jet, current, eps);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoChartAvailable) throw;
      // The speed ramps touch u in [eps, ~hysteresis*eps) right next to the
      // excluded endpoints; fold such samples into the endpoint exclusion.
      bool leading = !theta_defined;
      bool trailing = true;
      for (std::size_t k = i + 1; k < flat.size(); ++k)
        if (std::hypot(flat[k].xd, flat[k].yd) >= eps * kDefaultHysteresis * 4)
          trailing = false;
      if (!leading && !trailing)
        raise(ErrorKind::NoChartAvailable,
              "no chart available at interior sample t = " + std::to_string(f.t));
      s.excluded = true;
      s.theta = theta_defined ? last_theta : 0.0;
      current.reset();
      continue;
    }
    current = s.chart_id;

    s.theta = theta;
    s.thetad = thetad;
    last_theta = theta;
    theta_defined = true;

    // Inputs through the chart's recovery map (the chart carries the car
    // length).
    Binding fb = flat_binding(f);
    s.u = eval(xy_chart.phi[static_cast<std::size_t>(n)], fb);
    s.phi = eval(xy_chart.phi[static_cast<std::size_t>(n + 1)], fb);
  }

  // Backfill theta over a leading excluded run.
  for (std::size_t i = flat.size(); i-- > 0;) {
    if (!traj.samples[i].excluded) {
      double first_theta = traj.samples[i].theta;
      for (std::size_t k = 0; k < i; ++k)
        if (traj.samples[k].excluded) traj.samples[k].theta = first_theta;
      break;
    }
  }

  // Excluded interval metadata.
  bool open = false;
  double start = 0;
  for (const TrajectorySample& s : traj.samples) {
    if (s.excluded && !open) {
      open = true;
      start = s.t;
    } else if (!s.excluded && open) {
      open = false;
      traj.excluded_intervals.emplace_back(start, s.t);
    }
  }
  if (open) traj.excluded_intervals.emplace_back(start, traj.samples.back().t);
  return traj;
}

// ---- closed-loop validation -------------------------------------------------

ReplayReport validate_closed_loop(const Trajectory& traj, const ImplicitSystem& sys,
                                  double integrator_dt) {
  if (integrator_dt <= 0)
    raise(ErrorKind::Precondition, "integrator dt must be positive");
  const auto& samples = traj.samples;
  std::size_t first = 0, last = samples.size();
  while (first < samples.size() && samples[first].excluded) ++first;
  while (last > first && samples[last - 1].excluded) --last;
  ReplayReport report;
  if (last - first < 2) return report;  // zero-duration: trivially passes
  for (std::size_t i = first; i < last; ++i)
    if (samples[i].excluded)
      raise(ErrorKind::Precondition,
            "trajectory has excluded interior samples (t = " +
                std::to_string(samples[i].t) + ")");

  // Controls linearly interpolated between samples.
  auto controls_at = [&](double t, std::size_t hint) {
    std::size_t k = hint;
    while (k + 2 < last && samples[k + 1].t <= t) ++k;
    const TrajectorySample& a = samples[k];
    const TrajectorySample& b = samples[k + 1];
    double w = (t - a.t) / (b.t - a.t);
    w = std::clamp(w, 0.0, 1.0);
    return std::array<double, 2>{a.u + w * (b.u - a.u), a.phi + w * (b.phi - a.phi)};
  };

  const std::vector<Expr>& f = sys.explicit_form();
  const int n = sys.n(), m = sys.m();
  std::vector<double> state(static_cast<std::size_t>(n));
  state[0] = samples[first].x;
  state[1] = samples[first].y;
  state[2] = samples[first].theta;

  auto rhs = [&](double t, const std::vector<double>& x, std::size_t hint) {
    Binding b;
    for (int i = 0; i < n; ++i) b.set(i, 0, x[static_cast<std::size_t>(i)]);
    auto uv = controls_at(t, hint);
    for (int k = 0; k < m && k < 2; ++k) b.set(n + k, 0, uv[static_cast<std::size_t>(k)]);
    std::vector<double> dx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) dx[static_cast<std::size_t>(i)] = eval(f[i], b);
    return dx;
  };

  double t = samples[first].t;
  std::size_t hint = first;
  for (std::size_t i = first; i + 1 < last; ++i) {
    double t_next = samples[i + 1].t;
    while (t < t_next - 1e-12) {
      double dt = std::min(integrator_dt, t_next - t);
      auto k1 = rhs(t, state, hint);
      std::vector<double> x2 = state, x3 = state, x4 = state;
      for (int k = 0; k < n; ++k) x2[k] += dt / 2 * k1[k];
      auto k2 = rhs(t + dt / 2, x2, hint);
      for (int k = 0; k < n; ++k) x3[k] += dt / 2 * k2[k];
      auto k3 = rhs(t + dt / 2, x3, hint);
      for (int k = 0; k < n; ++k) x4[k] += dt * k3[k];
      auto k4 = rhs(t + dt, x4, hint);
      for (int k = 0; k < n; ++k)
        state[k] += dt / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
      t += dt;
    }
    t = t_next;
    hint = i;
    const TrajectorySample& s = samples[i + 1];
    report.max_position_error =
        std::max(report.max_position_error,
                 std::hypot(state[0] - s.x, state[1] - s.y));
    report.max_heading_error =
        std::max(report.max_heading_error, std::abs(state[2] - s.theta));
  }

  double res_sum = 0;
  for (std::size_t i = first; i < last; ++i) {
    const TrajectorySample& s = samples[i];
    double res = std::abs(s.xd * std::sin(s.theta) - s.yd * std::cos(s.theta));
    report.f_residual_max = std::max(report.f_residual_max, res);
    res_sum += res;
    ++report.samples_compared;
  }
  if (report.samples_compared > 0)
    report.f_residual_mean = res_sum / report.samples_compared;
  return report;
}

// ---- pipeline ----------------------------------------------------------------

Trajectory plan_route(const RouteSpec& route, const Atlas& atlas, Execution exec) {
  route.validate();
  ParamCurve base = fit_splines(route.waypoints);
  PlanarCurve curve = arc_length_reparam(base);
  TimeScaling ts = build_sigma(route.speed_segments, curve.length());
  std::vector<FlatSample> flat = compose_trajectory(curve, ts, route.sample_dt, exec);
  return lift_trajectory(flat, atlas);
}

RouteSpec demo_route() {
  RouteSpec r;
  r.waypoints = {
      {0.0, 0.0},  {0.0, 3.0},  {0.0, 6.0},                  // north along x = 0
      {0.9, 7.1},  {2.0, 7.5},                               // corner
      {4.0, 7.5},  {6.0, 7.5},                               // east along y = 7.5
      {7.4, 6.8},  {8.3, 5.6},  {8.6, 4.6},                  // descending approach
      {8.6, 4.0},  {8.42, 3.58}, {8.0, 3.4}, {7.58, 3.58},   // hairpin arc
      {7.4, 4.0},
      {7.4, 5.5},  {7.4, 7.0},                               // final leg north
  };
  r.speed_segments = {{0.18, 1.2}, {0.45, 1.5}, {0.62, 1.0}, {0.80, 0.5}, {1.0, 1.0}};
  r.car_length = 2.0;
  r.sample_dt = 0.01;
  return r;
}

RouteSpec route_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorKind::ParseError, std::string("bad route JSON: ") + e.what());
  }
  RouteSpec r;
  if (!j.contains("waypoints") || !j.contains("speed_segments"))
    raise(ErrorKind::ParseError, "route JSON needs waypoints and speed_segments");
  for (const auto& w : j["waypoints"])
    r.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
  for (const auto& s : j["speed_segments"])
    r.speed_segments.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  r.car_length = j.value("l", 2.0);
  r.sample_dt = j.value("dt", 0.01);
  return r;
}

std::string route_to_json(const RouteSpec& route) {
  nlohmann::json j;
  nlohmann::json wps = nlohmann::json::array();
  for (const auto& w : route.waypoints) wps.push_back({w[0], w[1]});
  j["waypoints"] = wps;
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : route.speed_segments)
    segs.push_back({s.arc_fraction_end, s.target_speed});
  j["speed_segments"] = segs;
  j["l"] = route.car_length;
  j["dt"] = route.sample_dt;
  return j.dump(2);
}

RouteSpec load_route(const std::string& name_or_path) {
  if (name_or_path == "demo") return demo_route();
  std::ifstream in(name_or_path);
  if (!in) raise(ErrorKind::IoError, "cannot open route file " + name_or_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return route_from_json(ss.str());
}

// ---- data files ----------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,s,x,y,xdot,ydot,xddot,yddot,theta,thetadot,u,phi,chart_id,excluded\n";
  for (const TrajectorySample& s : traj.samples) {
    os << fmt(s.t) << ',' << fmt(s.s) << ',' << fmt(s.x) << ',' << fmt(s.y) << ','
       << fmt(s.xd) << ',' << fmt(s.yd) << ',' << fmt(s.xdd) << ',' << fmt(s.ydd)
       << ',' << fmt(s.theta) << ',' << fmt(s.thetad) << ',' << fmt(s.u) << ','
       << fmt(s.phi) << ',' << s.chart_id << ',' << (s.excluded ? 1 : 0) << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    raise(ErrorKind::ParseError, "empty trajectory CSV");
  if (line != "t,s,x,y,xdot,ydot,xddot,yddot,theta,thetadot,u,phi,chart_id,excluded")
    raise(ErrorKind::ParseError, "unexpected trajectory CSV header");
  Trajectory traj;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 14)
      raise(ErrorKind::ParseError,
            "trajectory CSV line " + std::to_string(lineno) + " has " +
                std::to_string(cells.size()) + " fields, expected 14");
    TrajectorySample s;
    try {
      s.t = std::stod(cells[0]);
      s.s = std::stod(cells[1]);
      s.x = std::stod(cells[2]);
      s.y = std::stod(cells[3]);
      s.xd = std::stod(cells[4]);
      s.yd = std::stod(cells[5]);
      s.xdd = std::stod(cells[6]);
      s.ydd = std::stod(cells[7]);
      s.theta = std::stod(cells[8]);
      s.thetad = std::stod(cells[9]);
      s.u = std::stod(cells[10]);
      s.phi = std::stod(cells[11]);
    } catch (const std::exception&) {
      raise(ErrorKind::ParseError,
            "trajectory CSV line " + std::to_string(lineno) + ": bad number");
    }
    s.chart_id = cells[12];
    s.excluded = cells[13] == "1";
    traj.samples.push_back(std::move(s));
  }
  if (!traj.samples.empty()) traj.length = traj.samples.back().s;
  return traj;
}

namespace {

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) raise(ErrorKind::IoError, "cannot write " + tmp);
    os << content;
    if (!os) raise(ErrorKind::IoError, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(ErrorKind::IoError, "cannot rename " + tmp + " to " + path);
}

}  // namespace

void write_plot_data(const std::string& dir, const Trajectory& traj) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(ErrorKind::IoError, "cannot create directory " + dir);

  std::ostringstream route;
  route << "s,x,y\n";
  for (const auto& s : traj.samples)
    route << fmt(s.s) << ',' << fmt(s.x) << ',' << fmt(s.y) << '\n';
  write_file_atomic(dir + "/route_by_arc_length.csv", route.str());

  std::ostringstream speed;
  speed << "t,u\n";
  for (const auto& s : traj.samples) speed << fmt(s.t) << ',' << fmt(s.u) << '\n';
  write_file_atomic(dir + "/speed_profile.csv", speed.str());

  std::ostringstream flat;
  flat << "t,s,x,y\n";
  for (const auto& s : traj.samples)
    flat << fmt(s.t) << ',' << fmt(s.s) << ',' << fmt(s.x) << ',' << fmt(s.y) << '\n';
  write_file_atomic(dir + "/flat_outputs.csv", flat.str());

  std::ostringstream angles;
  angles << "t,theta,phi,excluded\n";
  for (const auto& s : traj.samples)
    angles << fmt(s.t) << ',' << fmt(s.theta) << ',' << fmt(s.phi) << ','
           << (s.excluded ? 1 : 0) << '\n';
  write_file_atomic(dir + "/angles_by_time.csv", angles.str());
}

}  // namespace flatlas
