#include "flatlas/atlas.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace flatlas {

Atlas::Atlas(std::shared_ptr<const ImplicitSystem> system, std::vector<Chart> charts)
    : system_(std::move(system)), charts_(std::move(charts)) {
  if (!system_) raise(ErrorKind::Precondition, "atlas requires a system");
  for (const Chart& c : charts_) {
    if (static_cast<int>(c.psi.size()) != system_->m())
      raise(ErrorKind::Precondition,
            "chart " + c.id + ": psi must have m components");
    if (static_cast<int>(c.phi.size()) != system_->n() + system_->m())
      raise(ErrorKind::Precondition,
            "chart " + c.id + ": phi must have n+m components");
  }
}

const Chart& Atlas::chart(const std::string& id) const {
  for (const Chart& c : charts_)
    if (c.id == id) return c;
  raise(ErrorKind::Precondition, "no chart named " + id);
}

const std::vector<Expr>& Atlas::singular_locus() const {
  if (!locus_) locus_ = hyper_regular_locus(p_matrix(*system_)).locus;
  return *locus_;
}

bool chart_contains(const Chart& c, const JetPoint& j, double eps) {
  if (eps <= 0) raise(ErrorKind::Precondition, "domain eps must be positive");
  return domain_margin(c, j) > eps;
}

double domain_margin(const Chart& c, const JetPoint& j) {
  Binding b = j.binding();
  double margin = std::numeric_limits<double>::infinity();
  for (const Expr& d : c.domain) margin = std::min(margin, std::abs(eval(d, b)));
  return margin;
}

JetPoint forward(const Chart& c, const JetPoint& j, int order, double eps,
                 int jet_cap) {
  if (!chart_contains(c, j, eps))
    raise(ErrorKind::OutOfDomain, "jet outside the domain of chart " + c.id);
  const int m = static_cast<int>(c.psi.size());
  JetPoint out(m, order);
  Binding b = j.binding();
  for (int i = 0; i < m; ++i) {
    Expr level = c.psi[i];
    for (int k = 0; k <= order; ++k) {
      out.set(i, k, eval(level, b));
      if (k < order) level = cartan_apply(level, jet_cap);
    }
  }
  return out;
}

InverseResult inverse(const Chart& c, const JetPoint& flat_jet, int n_states) {
  Binding b = flat_jet.binding();
  InverseResult out;
  for (std::size_t i = 0; i < c.phi.size(); ++i) {
    double v = eval(c.phi[i], b);
    if (static_cast<int>(i) < n_states)
      out.state.push_back(v);
    else
      out.input.push_back(v);
  }
  return out;
}

namespace {

// Lift a flat jet through phi's state components: the state part of phi and
// its flat-space prolongations evaluated at Y give a state jet.
JetPoint lift_through_phi(const Chart& c, const JetPoint& flat_jet, int n_states,
                          int order, int jet_cap) {
  Binding b = flat_jet.binding();
  JetPoint out(n_states, order);
  for (int i = 0; i < n_states; ++i) {
    Expr level = c.phi[static_cast<std::size_t>(i)];
    for (int k = 0; k <= order; ++k) {
      out.set(i, k, eval(level, b));
      if (k < order) level = cartan_apply(level, jet_cap);
    }
  }
  return out;
}

// Integrate the explicit model from the sampled jet with the control jets
// frozen as Taylor polynomials; returns the state jet at time t.
JetPoint flow_jet(const ImplicitSystem& sys, const ExplicitSample& start,
                  const std::vector<std::vector<double>>& control_taylor, double t,
                  int order) {
  const int n = sys.n(), m = sys.m();
  auto controls_at = [&](double tt) {
    std::vector<double> u(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      double acc = 0, fact = 1, tp = 1;
      for (std::size_t d = 0; d < control_taylor[k].size(); ++d) {
        if (d > 0) {
          fact *= static_cast<double>(d);
          tp *= tt;
        }
        acc += control_taylor[k][d] * tp / fact;
      }
      u[static_cast<std::size_t>(k)] = acc;
    }
    return u;
  };

  const std::vector<Expr>& f = sys.explicit_form();
  auto rhs = [&](double tt, const std::vector<double>& x) {
    Binding b;
    for (int i = 0; i < n; ++i) b.set(i, 0, x[static_cast<std::size_t>(i)]);
    std::vector<double> u = controls_at(tt);
    for (int k = 0; k < m; ++k) b.set(n + k, 0, u[static_cast<std::size_t>(k)]);
    std::vector<double> dx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) dx[static_cast<std::size_t>(i)] = eval(f[i], b);
    return dx;
  };

  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = start.jet.get(i, 0);
  const int steps = 8;
  const double dt = t / steps;
  if (t != 0.0) {
    for (int s = 0; s < steps; ++s) {
      double tt = s * dt;
      auto k1 = rhs(tt, x);
      std::vector<double> x2 = x, x3 = x, x4 = x;
      for (int i = 0; i < n; ++i) x2[i] += dt / 2 * k1[i];
      auto k2 = rhs(tt + dt / 2, x2);
      for (int i = 0; i < n; ++i) x3[i] += dt / 2 * k2[i];
      auto k3 = rhs(tt + dt / 2, x3);
      for (int i = 0; i < n; ++i) x4[i] += dt * k3[i];
      auto k4 = rhs(tt + dt, x4);
      for (int i = 0; i < n; ++i)
        x[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
  }

  // Jet levels at time t from the explicit prolongation.
  Binding b;
  for (int i = 0; i < n; ++i) b.set(i, 0, x[static_cast<std::size_t>(i)]);
  for (int k = 0; k < m; ++k) {
    // derivatives of the Taylor controls at t
    const auto& coef = control_taylor[k];
    for (std::size_t d = 0; d + 1 < coef.size(); ++d) {
      double acc = 0, tp = 1, fact = 1;
      for (std::size_t e = d; e < coef.size(); ++e) {
        if (e > d) {
          tp *= t;
          fact *= static_cast<double>(e - d);
        }
        acc += coef[e] * tp / fact;
      }
      b.set(n + k, static_cast<int>(d), acc);
    }
  }
  std::vector<Expr> level = f;
  JetPoint out(n, order);
  for (int i = 0; i < n; ++i) out.set(i, 0, x[static_cast<std::size_t>(i)]);
  for (int k = 0; k < order; ++k) {
    for (int i = 0; i < n; ++i) {
      double v = eval(level[i], b);
      b.set(i, k + 1, v);
      out.set(i, k + 1, v);
    }
    if (k + 1 < order)
      for (int i = 0; i < n; ++i) level[i] = cartan_apply(level[i]);
  }
  return out;
}

}  // namespace

CompatReport compatibility_check(const Atlas& atlas, const Chart& ci, const Chart& cj,
                                 int samples, double tol, std::uint64_t seed,
                                 Execution exec) {
  if (samples < 1) raise(ErrorKind::Precondition, "samples must be >= 1");
  const ImplicitSystem& sys = atlas.system();
  const int n = sys.n(), m = sys.m();
  const int jet_order = 4;

  CompatReport report;
  report.chart_i = ci.id;
  report.chart_j = cj.id;

  struct SampleResult {
    bool used = false;
    double roundtrip = 0.0;
    double prolong = 0.0;
  };
  std::vector<SampleResult> results(static_cast<std::size_t>(samples));
  std::vector<std::exception_ptr> fatal(static_cast<std::size_t>(samples));

  for_each_index(static_cast<std::size_t>(samples), exec, [&](std::size_t idx) {
    try {
      Rng rng = Rng::for_index(seed, idx);
      ExplicitSample s{JetPoint(n, jet_order), {}};
      bool found = false;
      for (int attempt = 0; attempt < 64; ++attempt) {
        s = sample_explicit_jet(sys, jet_order, rng);
        if (chart_contains(ci, s.jet, kDefaultDomainEps) &&
            chart_contains(cj, s.jet, kDefaultDomainEps)) {
          found = true;
          break;
        }
      }
      if (!found) return;  // no overlap hit from this stream

      SampleResult& r = results[idx];
      r.used = true;

      // (a) round trip through psi_j . phi_i and back
      JetPoint yi = forward(ci, s.jet, 3);
      JetPoint xi = lift_through_phi(ci, yi, n, 2, kDefaultJetCap);
      JetPoint yj = forward(cj, xi, 2);
      JetPoint xj = lift_through_phi(cj, yj, n, 2, kDefaultJetCap);
      JetPoint yi_back = forward(ci, xj, 1);
      for (int c = 0; c < m; ++c)
        for (int k = 0; k <= 1; ++k)
          r.roundtrip = std::max(r.roundtrip,
                                 std::abs(yi_back.get(c, k) - yi.get(c, k)));

      // (b) prolongation respect of the composite along the solution curve
      std::vector<std::vector<double>> taylor(static_cast<std::size_t>(m));
      Binding sb;  // recover the control jets used by the sampler
      {
        // sample_explicit_jet stored only u(0); rebuild a smooth control from
        // fresh Taylor coefficients anchored at the sampled inputs
        for (int k = 0; k < m; ++k) {
          taylor[static_cast<std::size_t>(k)] = {s.inputs[static_cast<std::size_t>(k)],
                                                 rng.uniform(-0.5, 0.5),
                                                 rng.uniform(-0.5, 0.5)};
        }
      }
      const double h = 1e-4;
      auto composite_at = [&](double t) {
        JetPoint jet = flow_jet(sys, s, taylor, t, jet_order);
        JetPoint y = forward(ci, jet, 3, kDefaultDomainEps / 4);
        JetPoint x = lift_through_phi(ci, y, n, 2, kDefaultJetCap);
        return forward(cj, x, 2, kDefaultDomainEps / 4);
      };
      JetPoint mid = composite_at(0.0);
      JetPoint plus = composite_at(h);
      JetPoint minus = composite_at(-h);
      for (int c = 0; c < m; ++c)
        for (int k = 0; k <= 1; ++k) {
          double fd = (plus.get(c, k) - minus.get(c, k)) / (2 * h);
          r.prolong = std::max(r.prolong, std::abs(fd - mid.get(c, k + 1)));
        }
    } catch (const Error&) {
      // domain fallout (e.g. the curve left the overlap); skip the sample
      results[idx].used = false;
    } catch (...) {
      fatal[idx] = std::current_exception();
    }
  });
  for (const auto& err : fatal)
    if (err) std::rethrow_exception(err);

  for (const SampleResult& r : results) {
    if (!r.used) continue;
    ++report.samples_used;
    report.max_roundtrip_residual = std::max(report.max_roundtrip_residual, r.roundtrip);
    report.max_prolongation_residual =
        std::max(report.max_prolongation_residual, r.prolong);
  }
  report.no_overlap = report.samples_used == 0;
  report.pass = report.no_overlap || (report.max_roundtrip_residual < tol &&
                                      report.max_prolongation_residual < 1e-5);
  return report;
}

std::string select_chart(const Atlas& a, const JetPoint& j,
                         const std::optional<std::string>& current, double eps,
                         double hysteresis) {
  if (hysteresis < 1)
    raise(ErrorKind::Precondition, "hysteresis factor must be >= 1");
  if (current) {
    const Chart& c = a.chart(*current);
    if (domain_margin(c, j) > eps) return *current;
  }
  const Chart* best = nullptr;
  double best_margin = 0.0;
  for (const Chart& c : a.charts()) {
    double m = domain_margin(c, j);
    if (m > best_margin) {
      best_margin = m;
      best = &c;
    }
  }
  double bar = current ? hysteresis * eps : eps;
  if (!best || best_margin <= bar)
    raise(ErrorKind::NoChartAvailable,
          "no chart margin above " + std::to_string(bar));
  return best->id;
}

Classification classify_point(const Atlas& a, const JetPoint& j, double eps,
                              double tol) {
  Classification out;
  Binding b = j.binding();
  for (const Expr& g : a.singular_locus())
    out.diagnostics.emplace_back(to_string(g, a.system().names()),
                                 eval(g, b));

  if (a.system().has_explicit_form() && !fiber_check(a.system(), j, tol)) {
    out.status = PointStatus::OutsideFiber;
    return out;
  }
  for (const Chart& c : a.charts())
    if (chart_contains(c, j, eps)) out.chart_ids.push_back(c.id);
  if (!out.chart_ids.empty()) {
    out.status = PointStatus::Regular;
    return out;
  }
  bool in_locus = true;
  for (const auto& [gen, value] : out.diagnostics)
    if (std::abs(value) >= tol) in_locus = false;
  if (in_locus) {
    out.status = PointStatus::CandidateIntrinsic;
    return out;
  }
  out.status = PointStatus::Regular;
  out.note =
      "apparent for this atlas: no chart covers the point but P(F) is "
      "hyper-regular here";
  return out;
}

std::vector<Classification> classify_points(const Atlas& a,
                                            const std::vector<JetPoint>& jets,
                                            double eps, double tol, Execution exec) {
  a.singular_locus();  // materialize before the parallel region
  std::vector<Classification> out(jets.size());
  std::vector<std::exception_ptr> fatal(jets.size());
  for_each_index(jets.size(), exec, [&](std::size_t i) {
    try {
      out[i] = classify_point(a, jets[i], eps, tol);
    } catch (...) {
      fatal[i] = std::current_exception();
    }
  });
  for (const auto& err : fatal)
    if (err) std::rethrow_exception(err);
  return out;
}

bool is_equilibrium(const JetPoint& j, double tol) {
  for (int i = 0; i < j.states(); ++i)
    for (int k = 1; k <= j.order(); ++k)
      if (std::abs(j.get(i, k)) > tol) return false;
  return true;
}

Atlas car_atlas(double length) {
  auto sys = std::make_shared<const ImplicitSystem>(car_system(length));
  Expr l = Expr::constant(Rational::from_double(length));

  // flat coordinates z1, z2 with their jets
  Expr z1 = Expr::var(0, 0), z2 = Expr::var(1, 0);
  Expr z1d = Expr::var(0, 1), z2d = Expr::var(1, 1);
  Expr z1dd = Expr::var(0, 2), z2dd = Expr::var(1, 2);

  // state coordinates for psi/domain
  Expr x = Expr::var(0, 0), y = Expr::var(1, 0), th = Expr::var(2, 0);
  Expr xd = Expr::var(0, 1), yd = Expr::var(1, 1), thd = Expr::var(2, 1);

  // Charts 1 and 2 share the flat output (x, y); the quadrant-aware
  // arctangent merges the paper's tan^-1 / cotan^-1 branches.
  Expr theta_xy = Expr::atan2(z2d, z1d);
  Expr speed_xy = Expr::sqrt(Expr::pow(z1d, 2) + Expr::pow(z2d, 2));
  Expr omega_xy = (z2dd * z1d - z1dd * z2d) / (Expr::pow(z1d, 2) + Expr::pow(z2d, 2));
  Expr steer_xy = Expr::atan2(l * omega_xy / speed_xy, Expr::constant(1));

  Chart u1{"U1", {xd}, {x, y}, {z1, z2, theta_xy, speed_xy, steer_xy}};
  Chart u2{"U2", {yd}, {x, y}, {z1, z2, theta_xy, speed_xy, steer_xy}};

  // Chart 3: z = (theta, x sin theta - y cos theta).
  Expr x3 = (z2d / z1d) * Expr::cos(z1) + z2 * Expr::sin(z1);
  Expr y3 = (z2d / z1d) * Expr::sin(z1) - z2 * Expr::cos(z1);
  Expr x3dot = cartan_apply(x3);
  Expr y3dot = cartan_apply(y3);
  Expr speed3 = Expr::sqrt(Expr::pow(x3dot, 2) + Expr::pow(y3dot, 2));
  Expr steer3 = Expr::atan2(l * z1d / speed3, Expr::constant(1));
  Chart u3{"U3",
           {thd},
           {th, x * Expr::sin(th) - y * Expr::cos(th)},
           {x3, y3, z1, speed3, steer3}};

  return Atlas(sys, {u1, u2, u3});
}

Atlas atlas_from_json(const std::string& text,
                      std::shared_ptr<const ImplicitSystem> system) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorKind::ParseError, std::string("bad atlas JSON: ") + e.what());
  }
  if (!j.contains("charts")) raise(ErrorKind::ParseError, "atlas JSON needs charts");

  NameTable flat_names;
  if (j.contains("flat_names")) {
    std::vector<std::string> list;
    for (const auto& s : j["flat_names"]) list.push_back(s.get<std::string>());
    flat_names = NameTable(list);
  }

  std::vector<Chart> charts;
  for (const auto& cj : j["charts"]) {
    Chart c;
    c.id = cj.at("id").get<std::string>();
    for (const auto& s : cj.at("domain"))
      c.domain.push_back(parse_expr(s.get<std::string>(), system->names()));
    for (const auto& s : cj.at("psi"))
      c.psi.push_back(parse_expr(s.get<std::string>(), system->names()));
    for (const auto& s : cj.at("phi"))
      c.phi.push_back(parse_expr(s.get<std::string>(), flat_names));
    charts.push_back(std::move(c));
  }
  return Atlas(std::move(system), std::move(charts));
}

std::string atlas_to_json(const Atlas& atlas) {
  nlohmann::json j;
  std::vector<std::string> flat;
  for (int i = 0; i < atlas.flat_dim(); ++i) flat.push_back("z" + std::to_string(i + 1));
  NameTable flat_names(flat);
  j["flat_names"] = flat;
  nlohmann::json charts = nlohmann::json::array();
  for (const Chart& c : atlas.charts()) {
    nlohmann::json cj;
    cj["id"] = c.id;
    nlohmann::json dom = nlohmann::json::array();
    for (const Expr& e : c.domain) dom.push_back(to_string(e, atlas.system().names()));
    cj["domain"] = dom;
    nlohmann::json psi = nlohmann::json::array();
    for (const Expr& e : c.psi) psi.push_back(to_string(e, atlas.system().names()));
    cj["psi"] = psi;
    nlohmann::json phi = nlohmann::json::array();
    for (const Expr& e : c.phi) phi.push_back(to_string(e, flat_names));
    cj["phi"] = phi;
    charts.push_back(cj);
  }
  j["charts"] = charts;
  return j.dump(2);
}

Atlas load_atlas(const std::string& name_or_path, double car_length) {
  if (name_or_path == "car-atlas") return car_atlas(car_length);
  std::ifstream in(name_or_path);
  if (!in) raise(ErrorKind::IoError, "cannot open atlas file " + name_or_path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto sys = std::make_shared<const ImplicitSystem>(car_system(car_length));
  return atlas_from_json(ss.str(), std::move(sys));
}

}  // namespace flatlas
