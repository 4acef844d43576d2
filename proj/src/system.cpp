#include "flatlas/system.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace flatlas {

ImplicitSystem::ImplicitSystem(int n, int m, std::vector<Expr> F,
                               std::optional<std::vector<Expr>> explicit_form,
                               NameTable names)
    : n_(n), m_(m), F_(std::move(F)), explicit_form_(std::move(explicit_form)),
      names_(std::move(names)) {
  if (n_ <= m_ || m_ < 1)
    raise(ErrorKind::Precondition, "implicit system requires n > m >= 1");
  if (static_cast<int>(F_.size()) != n_ - m_)
    raise(ErrorKind::Precondition, "implicit system requires n - m equations");
  for (const Expr& f : F_) {
    if (f.max_order() > 1)
      raise(ErrorKind::Precondition,
            "F components must depend on jet orders 0 and 1 only");
    for (Var v : f.vars())
      if (v.base >= n_)
        raise(ErrorKind::Precondition, "F components must not mention inputs");
  }
  if (explicit_form_) {
    if (static_cast<int>(explicit_form_->size()) != n_)
      raise(ErrorKind::Precondition, "explicit form needs n components");
    for (const Expr& f : *explicit_form_) {
      for (Var v : f.vars()) {
        if (v.order > 0)
          raise(ErrorKind::Precondition, "explicit form must be first order");
        if (v.base >= n_ + m_)
          raise(ErrorKind::Precondition, "explicit form mentions unknown inputs");
      }
    }
    // Consistency: substituting xdot = f(x,u) into F must vanish identically.
    std::map<Var, Expr> repl;
    for (int i = 0; i < n_; ++i) repl.emplace(Var{i, 1}, (*explicit_form_)[i]);
    for (const Expr& f : F_) {
      Expr residual = simplify(substitute(f, repl));
      if (!residual.is_zero() && !is_zero_modulo(residual))
        raise(ErrorKind::Precondition,
              "explicit form is inconsistent with F: residual " +
                  to_string(residual, names_));
    }
  }
}

const std::vector<Expr>& ImplicitSystem::explicit_form() const {
  if (!explicit_form_)
    raise(ErrorKind::NoExplicitForm, "system has no explicit form");
  return *explicit_form_;
}

void ImplicitSystem::set_input_range(int j, double lo, double hi) {
  if (j < 0 || j >= m_) raise(ErrorKind::Precondition, "input index out of range");
  input_ranges_.resize(static_cast<std::size_t>(m_));
  input_ranges_[static_cast<std::size_t>(j)] = {lo, hi};
}

std::pair<double, double> ImplicitSystem::input_range(int j, double lo,
                                                      double hi) const {
  if (j >= 0 && j < static_cast<int>(input_ranges_.size()) &&
      input_ranges_[static_cast<std::size_t>(j)])
    return *input_ranges_[static_cast<std::size_t>(j)];
  return {lo, hi};
}

OreMatrix p_matrix(const ImplicitSystem& sys) {
  const int rows = sys.n() - sys.m();
  OreMatrix M(rows, sys.n());
  for (int r = 0; r < rows; ++r)
    for (int i = 0; i < sys.n(); ++i) {
      Expr d0 = partial(sys.F()[r], Var{i, 0});
      Expr d1 = partial(sys.F()[r], Var{i, 1});
      M.at(r, i) = OrePoly::from_coeffs({d0, d1});
    }
  return M;
}

std::vector<Expr> prolong(const ImplicitSystem& sys, int k, int jet_cap) {
  if (k + 1 > jet_cap)
    raise(ErrorKind::TruncationOverflow,
          "prolongation order " + std::to_string(k) + " exceeds the jet cap");
  std::vector<Expr> out;
  for (const Expr& f : sys.F()) {
    Expr cur = f;
    out.push_back(simplify(cur));
    for (int j = 1; j <= k; ++j) {
      cur = cartan_apply(cur, jet_cap);
      out.push_back(simplify(cur));
    }
  }
  return out;
}

bool zero_set_member(const ImplicitSystem& sys, const JetPoint& j, int k, double tol) {
  if (j.order() < k + 1)
    raise(ErrorKind::Precondition, "jet order too small for the requested prolongation");
  Binding b = j.binding();
  for (const Expr& c : prolong(sys, k, j.order()))
    if (std::abs(eval(c, b)) >= tol) return false;
  return true;
}

bool fiber_check(const ImplicitSystem& sys, const JetPoint& j, double tol) {
  const std::vector<Expr>& f = sys.explicit_form();  // raises NoExplicitForm
  if (sys.fiber_predicate_) return sys.fiber_predicate_(j, tol);

  // Damped Gauss-Newton over u: minimize |xdot - f(x,u)|^2.
  const int n = sys.n(), m = sys.m();
  Binding base;
  for (int i = 0; i < n; ++i) base.set(i, 0, j.get(i, 0));

  std::vector<std::vector<Expr>> jac(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < m; ++u) jac[i].push_back(partial(f[i], Var{n + u, 0}));

  Rng rng(kDefaultSeed);
  for (int start = 0; start < 8; ++start) {
    Eigen::VectorXd u(m);
    for (int k2 = 0; k2 < m; ++k2) u[k2] = rng.uniform(-2.0, 2.0);
    double lambda = 1e-4;
    for (int it = 0; it < 80; ++it) {
      Binding b = base;
      for (int k2 = 0; k2 < m; ++k2) b.set(n + k2, 0, u[k2]);
      Eigen::VectorXd r(n);
      Eigen::MatrixXd J(n, m);
      bool ok = true;
      try {
        for (int i = 0; i < n; ++i) {
          r[i] = j.get(i, 1) - eval(f[i], b);
          for (int k2 = 0; k2 < m; ++k2) J(i, k2) = -eval(jac[i][k2], b);
        }
      } catch (const Error&) {
        ok = false;
      }
      if (!ok) break;
      if (r.norm() < 1e-7) return true;
      Eigen::MatrixXd JtJ = J.transpose() * J;
      JtJ.diagonal().array() += lambda;
      Eigen::VectorXd step = JtJ.ldlt().solve(J.transpose() * r);
      if (!step.allFinite()) break;
      u -= step;
      lambda = std::max(lambda * 0.7, 1e-10);
    }
  }
  return false;
}

ExplicitSample sample_explicit_jet(const ImplicitSystem& sys, int order, Rng& rng,
                                   double lo, double hi) {
  const std::vector<Expr>& f = sys.explicit_form();
  const int n = sys.n(), m = sys.m();
  if (order > kDefaultJetCap)
    raise(ErrorKind::Precondition, "jet order exceeds the truncation cap");

  Binding b;
  for (int i = 0; i < n; ++i) b.set(i, 0, rng.uniform(lo, hi));
  for (int u = 0; u < m; ++u)
    for (int k = 0; k < order; ++k) {
      auto [ulo, uhi] = k == 0 ? sys.input_range(u, lo, hi) : std::pair{lo, hi};
      b.set(n + u, k, rng.uniform(ulo, uhi));
    }

  // Prolong x^(k+1) = D^k f(x, u) level by level; each level only needs
  // values already bound.
  std::vector<Expr> level = f;
  for (int k = 0; k < order; ++k) {
    for (int i = 0; i < n; ++i) b.set(i, k + 1, eval(level[i], b));
    if (k + 1 < order)
      for (int i = 0; i < n; ++i) level[i] = cartan_apply(level[i]);
  }

  ExplicitSample out{JetPoint(n, order), {}};
  for (int i = 0; i < n; ++i)
    for (int k = 0; k <= order; ++k) out.jet.set(i, k, b.get(Var{i, k}));
  for (int u = 0; u < m; ++u) out.inputs.push_back(b.get(Var{n + u, 0}));
  return out;
}

JetSampler explicit_model_sampler(const ImplicitSystem& sys, int order) {
  // By-value copy keeps the sampler self-contained.
  ImplicitSystem copy = sys;
  return [copy, order](Rng& rng) {
    const int n = copy.n(), m = copy.m();
    Binding b;
    for (int i = 0; i < n; ++i) b.set(i, 0, rng.uniform(-2.0, 2.0));
    for (int u = 0; u < m; ++u)
      for (int k = 0; k < order; ++k) {
        auto [ulo, uhi] =
            k == 0 ? copy.input_range(u, -2.0, 2.0) : std::pair{-2.0, 2.0};
        b.set(n + u, k, rng.uniform(ulo, uhi));
      }
    std::vector<Expr> level = copy.explicit_form();
    for (int k = 0; k < order; ++k) {
      for (int i = 0; i < n; ++i) b.set(i, k + 1, eval(level[i], b));
      if (k + 1 < order)
        for (int i = 0; i < n; ++i) level[i] = cartan_apply(level[i]);
    }
    return b;
  };
}

ImplicitSystem car_system(double length) {
  if (length <= 0) raise(ErrorKind::Precondition, "car length must be positive");
  NameTable names({"x", "y", "theta", "u", "phi"});
  Expr xd = Expr::var(0, 1), yd = Expr::var(1, 1);
  Expr th = Expr::var(2, 0);
  Expr u = Expr::var(3, 0), phi = Expr::var(4, 0);
  Expr F = xd * Expr::sin(th) - yd * Expr::cos(th);

  Expr l = Expr::constant(Rational::from_double(length));
  std::vector<Expr> f{u * Expr::cos(th), u * Expr::sin(th),
                      u * Expr::tan(phi) / l};

  ImplicitSystem sys(3, 2, {F}, f, names);
  sys.set_input_range(0, 0.2, 2.0);    // forward speed only
  sys.set_input_range(1, -1.2, 1.2);   // steering clear of the tan poles
  // Closed form from the fiber proposition: the jet is unreachable exactly
  // when xdot = ydot = 0 while thetadot != 0.
  sys.set_fiber_predicate([](const JetPoint& j, double tol) {
    bool rest = std::abs(j.get(0, 1)) <= tol && std::abs(j.get(1, 1)) <= tol;
    return !(rest && std::abs(j.get(2, 1)) > tol);
  });
  return sys;
}

ImplicitSystem chain2_system() {
  NameTable names({"x1", "x2", "u"});
  Expr F = Expr::var(0, 1) - Expr::var(1, 0);
  std::vector<Expr> f{Expr::var(1, 0), Expr::var(2, 0)};
  return ImplicitSystem(2, 1, {F}, f, names);
}

ImplicitSystem system_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorKind::ParseError, std::string("bad system JSON: ") + e.what());
  }
  if (!j.contains("n") || !j.contains("m") || !j.contains("F"))
    raise(ErrorKind::ParseError, "system JSON needs n, m and F");
  int n = j["n"].get<int>();
  int m = j["m"].get<int>();

  NameTable names;
  if (j.contains("names")) {
    std::vector<std::string> list;
    if (j["names"].is_array()) {
      for (const auto& s : j["names"]) list.push_back(s.get<std::string>());
    } else {
      list.resize(static_cast<std::size_t>(n + m));
      for (auto it = j["names"].begin(); it != j["names"].end(); ++it) {
        int idx = it.value().get<int>();
        if (idx < 0 || idx >= n + m)
          raise(ErrorKind::ParseError, "names index out of range");
        list[static_cast<std::size_t>(idx)] = it.key();
      }
    }
    names = NameTable(list);
  }

  std::vector<Expr> F;
  for (const auto& s : j["F"]) F.push_back(parse_expr(s.get<std::string>(), names));
  std::optional<std::vector<Expr>> explicit_form;
  if (j.contains("explicit")) {
    std::vector<Expr> f;
    for (const auto& s : j["explicit"])
      f.push_back(parse_expr(s.get<std::string>(), names));
    explicit_form = std::move(f);
  }
  return ImplicitSystem(n, m, std::move(F), std::move(explicit_form), names);
}

std::string system_to_json(const ImplicitSystem& sys) {
  nlohmann::json j;
  j["n"] = sys.n();
  j["m"] = sys.m();
  nlohmann::json F = nlohmann::json::array();
  for (const Expr& f : sys.F()) F.push_back(to_string(f, sys.names()));
  j["F"] = F;
  if (sys.has_explicit_form()) {
    nlohmann::json ex = nlohmann::json::array();
    for (const Expr& f : sys.explicit_form()) ex.push_back(to_string(f, sys.names()));
    j["explicit"] = ex;
  }
  if (sys.names().size() > 0) j["names"] = sys.names().names();
  return j.dump(2);
}

ImplicitSystem load_system(const std::string& name_or_path, double car_length) {
  if (name_or_path == "car") return car_system(car_length);
  if (name_or_path == "chain2") return chain2_system();
  std::ifstream in(name_or_path);
  if (!in) raise(ErrorKind::IoError, "cannot open system file " + name_or_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return system_from_json(ss.str());
}

}  // namespace flatlas
