#ifndef FLATLAS_PLANNER_HPP
#define FLATLAS_PLANNER_HPP

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flatlas/atlas.hpp"

namespace flatlas {

struct SpeedSegment {
  double arc_fraction_end;  // in (0, 1], strictly increasing, last == 1
  double target_speed;      // > 0, m/s
};

struct RouteSpec {
  std::vector<std::array<double, 2>> waypoints;  // meters
  std::vector<SpeedSegment> speed_segments;
  double car_length = 2.0;  // meters
  double sample_dt = 0.01;  // seconds

  void validate() const;
};

// Natural cubic splines x(p), y(p) over the chord-length pseudo-parameter.
class ParamCurve {
 public:
  ParamCurve(std::vector<double> knots, std::vector<std::array<double, 4>> x_coef,
             std::vector<std::array<double, 4>> y_coef);

  double p_end() const { return knots_.back(); }
  // derivative order 0..2 with respect to p
  double x(double p, int der = 0) const;
  double y(double p, int der = 0) const;
  double speed(double p) const;  // |(x'(p), y'(p))|

 private:
  double eval(const std::vector<std::array<double, 4>>& c, double p, int der) const;
  std::vector<double> knots_;
  std::vector<std::array<double, 4>> x_;
  std::vector<std::array<double, 4>> y_;
};

ParamCurve fit_splines(const std::vector<std::array<double, 2>>& waypoints);

// Arc-length parametrized plane curve, unit speed.
class PlanarCurve {
 public:
  PlanarCurve(ParamCurve base, double length, std::vector<double> s_table,
              std::vector<double> p_table);

  double length() const { return length_; }
  double param_of_arc(double s) const;  // s -> p
  std::array<double, 2> position(double s) const;
  std::array<double, 2> derivative(double s) const;         // unit tangent
  std::array<double, 2> second_derivative(double s) const;  // curvature vector

 private:
  ParamCurve base_;
  double length_;
  std::vector<double> s_table_;
  std::vector<double> p_table_;
};

PlanarCurve arc_length_reparam(const ParamCurve& curve);

// Piecewise-quadratic time scaling sigma: [0,T] -> [0,L]; sigma_dot is a
// continuous polyline with sigma_dot(0) = sigma_dot(T) = 0.
class TimeScaling {
 public:
  struct Piece {
    double t0;  // piece start time
    double s0;  // sigma(t0)
    double v0;  // sigma_dot(t0)
    double a;   // constant acceleration on the piece
  };

  TimeScaling(std::vector<Piece> pieces, double duration, double length);

  double duration() const { return T_; }
  double length() const { return L_; }
  const std::vector<Piece>& pieces() const { return pieces_; }

  double sigma(double t) const;
  double sigma_dot(double t) const;
  double sigma_ddot(double t) const;  // one-sided at piece joins

 private:
  const Piece& piece_at(double t) const;
  std::vector<Piece> pieces_;
  double T_;
  double L_;
};

// Trapezoidal ramps per arc-length segment; the ramp rate is the minimal one
// meeting feasibility unless a fixed rate is supplied.
TimeScaling build_sigma(const std::vector<SpeedSegment>& segments, double length,
                        std::optional<double> ramp_rate = std::nullopt);

struct FlatSample {
  double t = 0, s = 0;
  double x = 0, y = 0;
  double xd = 0, yd = 0;
  double xdd = 0, ydd = 0;
};

// Samples t = k*dt plus every scaling breakpoint; chain rule through sigma.
std::vector<FlatSample> compose_trajectory(const PlanarCurve& curve,
                                           const TimeScaling& ts, double dt,
                                           Execution exec = Execution::Parallel);

struct TrajectorySample {
  double t = 0, s = 0;
  double x = 0, y = 0, xd = 0, yd = 0, xdd = 0, ydd = 0;
  double theta = 0, thetad = 0;
  double u = 0, phi = 0;
  std::string chart_id;
  bool excluded = false;  // endpoint with vanishing speed: u, phi undefined
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double length = 0;
  std::vector<std::pair<double, double>> excluded_intervals;
};

// Chart-switched lift of flat samples to full state and inputs. Samples with
// u < eps are marked excluded (theta held); an interior sample with no
// usable chart aborts with NoChartAvailable.
Trajectory lift_trajectory(const std::vector<FlatSample>& flat, const Atlas& atlas,
                           double eps = 1e-6);

struct ReplayReport {
  double max_position_error = 0;
  double max_heading_error = 0;
  double f_residual_max = 0;
  double f_residual_mean = 0;
  int samples_compared = 0;
};

// Re-integrates the explicit model (classical RK4) under the planned
// controls, linearly interpolated in t, and compares against the plan.
ReplayReport validate_closed_loop(const Trajectory& traj, const ImplicitSystem& sys,
                                  double integrator_dt);

// The complete pipeline.
Trajectory plan_route(const RouteSpec& route, const Atlas& atlas,
                      Execution exec = Execution::Parallel);

// Bundled demo route: axis-aligned stretches joined by a turning arc,
// qualitatively matching the published figure (which carries no coordinates).
RouteSpec demo_route();

RouteSpec route_from_json(const std::string& text);
std::string route_to_json(const RouteSpec& route);
RouteSpec load_route(const std::string& name_or_path);

// Trajectory CSV, header:
// t,s,x,y,xdot,ydot,xddot,yddot,theta,thetadot,u,phi,chart_id,excluded
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is);

// Plot-data exports (one CSV per figure role).
void write_plot_data(const std::string& dir, const Trajectory& traj);

}  // namespace flatlas

#endif  // FLATLAS_PLANNER_HPP
