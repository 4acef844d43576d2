#ifndef FLATLAS_EXPR_HPP
#define FLATLAS_EXPR_HPP

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "flatlas/errors.hpp"
#include "flatlas/rational.hpp"

namespace flatlas {

// A jet coordinate x_base^(order): base indexes the underlying scalar
// variable, order its time-derivative level.
struct Var {
  int base = 0;
  int order = 0;
  friend auto operator<=>(const Var&, const Var&) = default;
};

// Derivative orders above this cap raise TruncationOverflow. Order-2 jets are
// all the car planner needs; the headroom covers prolongation checks.
inline constexpr int kDefaultJetCap = 6;

enum class Kind { Constant, Variable, Call, Power, Product, Sum };
enum class Fn { Sin, Cos, Tan, Atan2, Sqrt };

class Expr;
using ExprVec = std::vector<Expr>;

struct ExprNode {
  Kind kind = Kind::Constant;
  Rational value;      // Constant
  Var var;             // Variable
  Fn fn = Fn::Sin;     // Call
  int expo = 0;        // Power exponent (integer, never 0 or 1)
  ExprVec kids;        // Sum/Product operands, Call args, Power base at [0]

  std::size_t hash = 0;  // structural, precomputed
  int nodes = 1;         // subtree node count
  int max_order = -1;    // max Var order in subtree, -1 if none
};

// Immutable expression handle with structural sharing. All factory functions
// return the canonical normal form: sums and products are flattened, sorted
// and constant-folded, like terms and like powers merged. Structural equality
// of two normal forms implies pointwise equal evaluation.
class Expr {
 public:
  Expr() : Expr(constant(0)) {}

  static Expr constant(Rational r);
  static Expr constant(std::int64_t n) { return constant(Rational(n)); }
  static Expr var(Var v);
  static Expr var(int base, int order = 0) { return var(Var{base, order}); }

  static Expr sum(ExprVec terms);
  static Expr product(ExprVec factors);
  static Expr pow(const Expr& base, int exponent);
  static Expr call(Fn fn, ExprVec args);

  static Expr sin(const Expr& a) { return call(Fn::Sin, {a}); }
  static Expr cos(const Expr& a) { return call(Fn::Cos, {a}); }
  static Expr tan(const Expr& a) { return call(Fn::Tan, {a}); }
  static Expr sqrt(const Expr& a) { return call(Fn::Sqrt, {a}); }
  static Expr atan2(const Expr& y, const Expr& x) { return call(Fn::Atan2, {y, x}); }

  friend Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
  friend Expr operator-(const Expr& a, const Expr& b) {
    return sum({a, product({constant(-1), b})});
  }
  friend Expr operator-(const Expr& a) { return product({constant(-1), a}); }
  friend Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }
  friend Expr operator/(const Expr& a, const Expr& b) {
    return product({a, pow(b, -1)});
  }

  const ExprNode& node() const { return *node_; }
  Kind kind() const { return node_->kind; }
  bool is_constant() const { return node_->kind == Kind::Constant; }
  bool is_zero() const { return is_constant() && node_->value.is_zero(); }
  bool is_one() const { return is_constant() && node_->value.is_one(); }
  std::size_t hash() const { return node_->hash; }
  int node_count() const { return node_->nodes; }
  int max_order() const { return node_->max_order; }

  bool same(const Expr& other) const;          // structural equality
  static int compare(const Expr& a, const Expr& b);  // canonical total order
  friend bool operator<(const Expr& a, const Expr& b) { return compare(a, b) < 0; }

  void collect_vars(std::set<Var>& out) const;
  std::set<Var> vars() const {
    std::set<Var> out;
    collect_vars(out);
    return out;
  }

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  static Expr intern(ExprNode&& n);

  std::shared_ptr<const ExprNode> node_;
};

// A finite jet assignment Var -> value.
class Binding {
 public:
  Binding() = default;
  explicit Binding(std::map<Var, double> values) : values_(std::move(values)) {}

  void set(Var v, double x) { values_[v] = x; }
  void set(int base, int order, double x) { values_[Var{base, order}] = x; }
  bool has(Var v) const { return values_.count(v) != 0; }
  double get(Var v) const;
  const std::map<Var, double>& values() const { return values_; }

 private:
  std::map<Var, double> values_;
};

// Evaluation. Division by zero, sqrt of a negative argument and atan2(0,0)
// raise DomainError rather than producing NaN. A positive pole_guard widens
// the rejected neighborhood: |denominator| <= pole_guard is treated as a
// pole (used by the randomized zero test to stay clear of poles).
double eval(const Expr& e, const Binding& b, double pole_guard = 0.0);

// Symbolic partial derivative with respect to a single jet coordinate.
Expr partial(const Expr& e, Var v);

// Total-derivative (Cartan) field: shifts every coordinate one derivative
// level up, sum over the chain rule. cartan_apply(x_i^(k)) = x_i^(k+1).
Expr cartan_apply(const Expr& e, int jet_cap = kDefaultJetCap);
Expr cartan_apply_n(const Expr& e, int times, int jet_cap = kDefaultJetCap);

// Substitute expressions for variables (simultaneous).
Expr substitute(const Expr& e, const std::map<Var, Expr>& repl);

// Value-preserving simplification: rational-constant folding, 0/1 identities,
// sin^2+cos^2 collapsing, common-factor cancellation in quotients. The result
// is a normal form: two expressions equal off their pole sets and built from
// the supported fragment simplify to the same tree in the cases the tests pin
// down. Falls back to the constructor-canonical input if normalization would
// exceed the node budget.
Expr simplify(const Expr& e);

// Numerator/denominator split with den canonically positive-leading;
// den is the literal 1 when e is polynomial in its atoms.
struct Fraction {
  Expr num;
  Expr den;
};
Fraction as_fraction(const Expr& e);

// Strips the leading rational coefficient (zero-set preserving normal form
// used when comparing locus generators).
Expr monic(const Expr& e);

}  // namespace flatlas

#endif  // FLATLAS_EXPR_HPP
