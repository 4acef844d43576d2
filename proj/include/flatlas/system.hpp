#ifndef FLATLAS_SYSTEM_HPP
#define FLATLAS_SYSTEM_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flatlas/ore.hpp"

namespace flatlas {

// Numeric truncated jet: values[i][k] = x_i^(k), orders 0..R.
class JetPoint {
 public:
  JetPoint(int n, int order)
      : n_(n), order_(order),
        values_(static_cast<std::size_t>(n) * (order + 1), 0.0) {
    if (order > kDefaultJetCap)
      raise(ErrorKind::Precondition, "jet order exceeds the truncation cap");
  }

  int states() const { return n_; }
  int order() const { return order_; }
  double get(int base, int k) const {
    return values_[static_cast<std::size_t>(base) * (order_ + 1) + k];
  }
  void set(int base, int k, double v) {
    values_[static_cast<std::size_t>(base) * (order_ + 1) + k] = v;
  }

  Binding binding() const {
    Binding b;
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k <= order_; ++k) b.set(i, k, get(i, k));
    return b;
  }

 private:
  int n_ = 0;
  int order_ = 0;
  std::vector<double> values_;
};

// Implicit system F(x, xdot) = 0 over n states with m inputs (n-m equations),
// optionally carrying the explicit model xdot = f(x, u) for fiber checks and
// exact on-constraint sampling. Input u_j is coordinate base n+j.
class ImplicitSystem {
 public:
  ImplicitSystem(int n, int m, std::vector<Expr> F,
                 std::optional<std::vector<Expr>> explicit_form = std::nullopt,
                 NameTable names = {});

  int n() const { return n_; }
  int m() const { return m_; }
  const std::vector<Expr>& F() const { return F_; }
  bool has_explicit_form() const { return explicit_form_.has_value(); }
  const std::vector<Expr>& explicit_form() const;
  const NameTable& names() const { return names_; }

  // Closed-form fiber predicate override (the car installs one).
  void set_fiber_predicate(std::function<bool(const JetPoint&, double)> p) {
    fiber_predicate_ = std::move(p);
  }

  // Sampling range for input j at order 0 (the car restricts its speed to
  // positive forward values and the steering away from the tan poles).
  void set_input_range(int j, double lo, double hi);
  std::pair<double, double> input_range(int j, double lo, double hi) const;

  Var state(int i, int order = 0) const { return Var{i, order}; }
  Var input(int j, int order = 0) const { return Var{n_ + j, order}; }

 private:
  int n_;
  int m_;
  std::vector<Expr> F_;
  std::optional<std::vector<Expr>> explicit_form_;
  NameTable names_;
  std::function<bool(const JetPoint&, double)> fiber_predicate_;
  std::vector<std::optional<std::pair<double, double>>> input_ranges_;

  friend bool fiber_check(const ImplicitSystem&, const JetPoint&, double);
};

// P(F): the (n-m) x n matrix of first-order operators
// entry(r, i) = dF_r/dx_i + dF_r/dxdot_i * tau, coefficients simplified.
OreMatrix p_matrix(const ImplicitSystem& sys);

// All prolongations D^j(F_r) for j <= k, simplified.
std::vector<Expr> prolong(const ImplicitSystem& sys, int k,
                          int jet_cap = kDefaultJetCap);

// True iff every prolonged constraint up to order k evaluates below tol at j.
bool zero_set_member(const ImplicitSystem& sys, const JetPoint& j, int k,
                     double tol = 1e-9);

// True iff some input value realizes the jet's first-order part under the
// explicit model: exists u with xdot = f(x, u). Uses the closed-form
// predicate when installed, otherwise damped Gauss-Newton over u from 8
// random starts with residual threshold 1e-7.
bool fiber_check(const ImplicitSystem& sys, const JetPoint& j, double tol = 1e-9);

// Exact sampling on the zero set via the explicit model: draw states and
// input jets, then prolong xdot = f(x, u) through the jet levels.
struct ExplicitSample {
  JetPoint jet;
  std::vector<double> inputs;  // u_j at order 0
};
ExplicitSample sample_explicit_jet(const ImplicitSystem& sys, int order, Rng& rng,
                                   double lo = -2.0, double hi = 2.0);

// Sampler adapter for the randomized zero test: bindings cover state jets to
// `order` plus input jets.
JetSampler explicit_model_sampler(const ImplicitSystem& sys, int order);

// Built-in systems.
ImplicitSystem car_system(double length = 2.0);
ImplicitSystem chain2_system();

// JSON system files:
// {"n":3,"m":2,"F":["..."],"explicit":["..."],"names":["x","y","theta","u","phi"]}
ImplicitSystem system_from_json(const std::string& text);
std::string system_to_json(const ImplicitSystem& sys);

// Resolves a built-in name or a JSON file path.
ImplicitSystem load_system(const std::string& name_or_path, double car_length = 2.0);

}  // namespace flatlas

#endif  // FLATLAS_SYSTEM_HPP
