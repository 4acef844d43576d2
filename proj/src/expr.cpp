#include "flatlas/expr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace flatlas {

namespace {

int kind_rank(Kind k) {
  switch (k) {
    case Kind::Constant: return 0;
    case Kind::Variable: return 1;
    case Kind::Call: return 2;
    case Kind::Power: return 3;
    case Kind::Product: return 4;
    case Kind::Sum: return 5;
  }
  return 6;
}

void hash_mix(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

double ipow(double base, int e) {
  if (e < 0) return 1.0 / ipow(base, -e);
  double acc = 1.0, b = base;
  for (int k = e; k > 0; k >>= 1) {
    if (k & 1) acc *= b;
    b *= b;
  }
  return acc;
}

}  // namespace

Expr Expr::intern(ExprNode&& n) {
  std::size_t h = static_cast<std::size_t>(kind_rank(n.kind)) * 1099511628211ULL;
  int nodes = 1;
  int max_order = -1;
  switch (n.kind) {
    case Kind::Constant:
      hash_mix(h, std::hash<std::int64_t>{}(n.value.num()));
      hash_mix(h, std::hash<std::int64_t>{}(n.value.den()));
      break;
    case Kind::Variable:
      hash_mix(h, static_cast<std::size_t>(n.var.base) * 31 + 7);
      hash_mix(h, static_cast<std::size_t>(n.var.order));
      max_order = n.var.order;
      break;
    case Kind::Call:
      hash_mix(h, static_cast<std::size_t>(n.fn));
      break;
    case Kind::Power:
      hash_mix(h, static_cast<std::size_t>(n.expo < 0 ? -2 * n.expo + 1 : 2 * n.expo));
      break;
    default:
      break;
  }
  for (const Expr& k : n.kids) {
    hash_mix(h, k.hash());
    nodes += k.node_count();
    max_order = std::max(max_order, k.max_order());
  }
  n.hash = h;
  n.nodes = nodes;
  n.max_order = max_order;
  return Expr(std::make_shared<const ExprNode>(std::move(n)));
}

int Expr::compare(const Expr& a, const Expr& b) {
  if (a.node_.get() == b.node_.get()) return 0;
  const ExprNode& x = a.node();
  const ExprNode& y = b.node();
  if (int d = kind_rank(x.kind) - kind_rank(y.kind); d != 0) return d < 0 ? -1 : 1;
  switch (x.kind) {
    case Kind::Constant: {
      auto c = x.value <=> y.value;
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case Kind::Variable: {
      if (x.var.base != y.var.base) return x.var.base < y.var.base ? -1 : 1;
      if (x.var.order != y.var.order) return x.var.order < y.var.order ? -1 : 1;
      return 0;
    }
    case Kind::Call:
      if (x.fn != y.fn) return static_cast<int>(x.fn) < static_cast<int>(y.fn) ? -1 : 1;
      break;
    case Kind::Power:
      if (int d = compare(x.kids[0], y.kids[0]); d != 0) return d;
      if (x.expo != y.expo) return x.expo < y.expo ? -1 : 1;
      return 0;
    default:
      break;
  }
  std::size_t n = std::min(x.kids.size(), y.kids.size());
  for (std::size_t i = 0; i < n; ++i)
    if (int d = compare(x.kids[i], y.kids[i]); d != 0) return d;
  if (x.kids.size() != y.kids.size())
    return x.kids.size() < y.kids.size() ? -1 : 1;
  return 0;
}

bool Expr::same(const Expr& other) const {
  if (node_.get() == other.node_.get()) return true;
  if (hash() != other.hash()) return false;
  return compare(*this, other) == 0;
}

void Expr::collect_vars(std::set<Var>& out) const {
  if (kind() == Kind::Variable) {
    out.insert(node().var);
    return;
  }
  for (const Expr& k : node().kids) k.collect_vars(out);
}

Expr Expr::constant(Rational r) {
  ExprNode n;
  n.kind = Kind::Constant;
  n.value = r;
  return intern(std::move(n));
}

Expr Expr::var(Var v) {
  if (v.base < 0 || v.order < 0)
    raise(ErrorKind::Precondition, "variable indices must be non-negative");
  ExprNode n;
  n.kind = Kind::Variable;
  n.var = v;
  return intern(std::move(n));
}

namespace {

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const {
    return Expr::compare(a, b) < 0;
  }
};

}  // namespace

Expr Expr::sum(ExprVec terms) {
  Rational cst(0);
  std::map<Expr, Rational, ExprLess> by_core;

  std::function<void(const Expr&, const Rational&)> add = [&](const Expr& t,
                                                              const Rational& scale) {
    const ExprNode& n = t.node();
    if (n.kind == Kind::Constant) {
      cst = cst + n.value * scale;
      return;
    }
    if (n.kind == Kind::Sum) {
      for (const Expr& k : n.kids) add(k, scale);
      return;
    }
    Rational coeff = scale;
    Expr core = t;
    if (n.kind == Kind::Product && n.kids[0].is_constant()) {
      coeff = coeff * n.kids[0].node().value;
      if (n.kids.size() == 2) {
        core = n.kids[1];
      } else {
        ExprNode p;
        p.kind = Kind::Product;
        p.kids.assign(n.kids.begin() + 1, n.kids.end());
        core = intern(std::move(p));
      }
    }
    auto [it, inserted] = by_core.emplace(core, coeff);
    if (!inserted) it->second = it->second + coeff;
  };
  for (const Expr& t : terms) add(t, Rational(1));

  ExprVec kids;
  if (!cst.is_zero()) kids.push_back(constant(cst));
  for (const auto& [core, coeff] : by_core) {
    if (coeff.is_zero()) continue;
    if (coeff.is_one()) {
      kids.push_back(core);
      continue;
    }
    // Attach the collected coefficient without re-running normalization:
    // the core is already canonical and constant-free.
    ExprNode p;
    p.kind = Kind::Product;
    p.kids.push_back(constant(coeff));
    if (core.kind() == Kind::Product)
      for (const Expr& k : core.node().kids) p.kids.push_back(k);
    else
      p.kids.push_back(core);
    kids.push_back(intern(std::move(p)));
  }
  if (kids.empty()) return constant(0);
  if (kids.size() == 1) return kids[0];
  std::sort(kids.begin(), kids.end(), ExprLess{});
  ExprNode n;
  n.kind = Kind::Sum;
  n.kids = std::move(kids);
  return intern(std::move(n));
}

Expr Expr::product(ExprVec factors) {
  Rational cst(1);
  std::map<Expr, int, ExprLess> expo;

  std::function<void(const Expr&, int)> mul = [&](const Expr& f, int e) {
    const ExprNode& n = f.node();
    if (n.kind == Kind::Constant) {
      cst = cst * n.value.pow(e);
      return;
    }
    if (n.kind == Kind::Product) {
      for (const Expr& k : n.kids) mul(k, e);
      return;
    }
    if (n.kind == Kind::Power) {
      mul(n.kids[0], n.expo * e);
      return;
    }
    expo[f] += e;
  };
  for (const Expr& f : factors) mul(f, 1);

  if (cst.is_zero()) return constant(0);
  ExprVec kids;
  for (const auto& [base, e] : expo) {
    if (e == 0) continue;
    if (e == 1) {
      kids.push_back(base);
    } else {
      ExprNode p;
      p.kind = Kind::Power;
      p.expo = e;
      p.kids.push_back(base);
      kids.push_back(intern(std::move(p)));
    }
  }
  if (kids.empty()) return constant(cst);
  std::sort(kids.begin(), kids.end(), ExprLess{});
  if (!cst.is_one()) kids.insert(kids.begin(), constant(cst));
  if (kids.size() == 1) return kids[0];
  ExprNode n;
  n.kind = Kind::Product;
  n.kids = std::move(kids);
  return intern(std::move(n));
}

Expr Expr::pow(const Expr& base, int exponent) {
  if (exponent == 0) return constant(1);
  if (exponent == 1) return base;
  const ExprNode& n = base.node();
  if (n.kind == Kind::Constant) return constant(n.value.pow(exponent));
  if (n.kind == Kind::Power) return pow(n.kids[0], n.expo * exponent);
  if (n.kind == Kind::Product) {
    ExprVec kids;
    for (const Expr& k : n.kids) kids.push_back(pow(k, exponent));
    return product(std::move(kids));
  }
  ExprNode p;
  p.kind = Kind::Power;
  p.expo = exponent;
  p.kids.push_back(base);
  return intern(std::move(p));
}

Expr Expr::call(Fn fn, ExprVec args) {
  // Constant folding for the exact cases only.
  if (fn != Fn::Atan2 && args[0].is_constant()) {
    const Rational& v = args[0].node().value;
    if (v.is_zero()) {
      switch (fn) {
        case Fn::Sin:
        case Fn::Tan:
        case Fn::Sqrt: return constant(0);
        case Fn::Cos: return constant(1);
        default: break;
      }
    }
    if (fn == Fn::Sqrt && v.sign() > 0) {
      // Perfect squares fold exactly; anything else stays symbolic.
      double rn = std::sqrt(static_cast<double>(v.num()));
      double rd = std::sqrt(static_cast<double>(v.den()));
      auto in = static_cast<std::int64_t>(rn + 0.5);
      auto id = static_cast<std::int64_t>(rd + 0.5);
      if (in * in == v.num() && id * id == v.den()) return constant(Rational(in, id));
    }
  }
  if (fn == Fn::Atan2 && args[0].is_zero() && args[1].is_constant() &&
      args[1].node().value.sign() > 0)
    return constant(0);

  // Angle parity: keep the canonically smaller of u and -u inside the call.
  if (fn == Fn::Sin || fn == Fn::Cos || fn == Fn::Tan) {
    Expr neg = -args[0];
    if (compare(neg, args[0]) < 0) {
      Expr inner = call(fn, {neg});
      return fn == Fn::Cos ? inner : -inner;
    }
  }

  ExprNode n;
  n.kind = Kind::Call;
  n.fn = fn;
  n.kids = std::move(args);
  return intern(std::move(n));
}

double Binding::get(Var v) const {
  auto it = values_.find(v);
  if (it == values_.end())
    raise(ErrorKind::UnboundVariable,
          "x" + std::to_string(v.base + 1) + "^(" + std::to_string(v.order) + ")");
  return it->second;
}

double eval(const Expr& e, const Binding& b, double pole_guard) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant:
      return n.value.to_double();
    case Kind::Variable:
      return b.get(n.var);
    case Kind::Sum: {
      double acc = 0;
      for (const Expr& k : n.kids) acc += eval(k, b, pole_guard);
      return acc;
    }
    case Kind::Product: {
      double acc = 1;
      for (const Expr& k : n.kids) acc *= eval(k, b, pole_guard);
      return acc;
    }
    case Kind::Power: {
      double base = eval(n.kids[0], b, pole_guard);
      if (n.expo < 0 && std::abs(base) <= pole_guard)
        raise(ErrorKind::DomainError, "pole: division by zero");
      return ipow(base, n.expo);
    }
    case Kind::Call: {
      double a0 = eval(n.kids[0], b, pole_guard);
      switch (n.fn) {
        case Fn::Sin: return std::sin(a0);
        case Fn::Cos: return std::cos(a0);
        case Fn::Tan: return std::tan(a0);
        case Fn::Sqrt:
          if (a0 < 0) raise(ErrorKind::DomainError, "sqrt of negative value");
          return std::sqrt(a0);
        case Fn::Atan2: {
          double a1 = eval(n.kids[1], b, pole_guard);
          if (std::abs(a0) <= pole_guard && std::abs(a1) <= pole_guard)
            raise(ErrorKind::DomainError, "atan2 at the origin");
          return std::atan2(a0, a1);
        }
      }
      break;
    }
  }
  raise(ErrorKind::DomainError, "malformed expression node");
}

namespace {

// Shared derivation skeleton: `leaf` maps a Var to its derivative. Both the
// partial derivative and the total-derivative field are instances.
Expr derive(const Expr& e, const std::function<Expr(Var)>& leaf) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant:
      return Expr::constant(0);
    case Kind::Variable:
      return leaf(n.var);
    case Kind::Sum: {
      ExprVec terms;
      for (const Expr& k : n.kids) terms.push_back(derive(k, leaf));
      return Expr::sum(std::move(terms));
    }
    case Kind::Product: {
      ExprVec terms;
      for (std::size_t i = 0; i < n.kids.size(); ++i) {
        ExprVec fac;
        for (std::size_t j = 0; j < n.kids.size(); ++j)
          fac.push_back(i == j ? derive(n.kids[j], leaf) : n.kids[j]);
        terms.push_back(Expr::product(std::move(fac)));
      }
      return Expr::sum(std::move(terms));
    }
    case Kind::Power: {
      Expr db = derive(n.kids[0], leaf);
      return Expr::product({Expr::constant(n.expo), Expr::pow(n.kids[0], n.expo - 1), db});
    }
    case Kind::Call: {
      const Expr& u = n.kids[0];
      Expr du = derive(u, leaf);
      switch (n.fn) {
        case Fn::Sin: return Expr::cos(u) * du;
        case Fn::Cos: return -(Expr::sin(u) * du);
        case Fn::Tan:
          return (Expr::constant(1) + Expr::pow(Expr::tan(u), 2)) * du;
        case Fn::Sqrt:
          return Expr::product({Expr::constant(Rational(1, 2)),
                                Expr::pow(Expr::sqrt(u), -1), du});
        case Fn::Atan2: {
          const Expr& x = n.kids[1];
          Expr dx = derive(x, leaf);
          Expr den = Expr::pow(u, 2) + Expr::pow(x, 2);
          return (x * du - u * dx) / den;
        }
      }
      break;
    }
  }
  raise(ErrorKind::DomainError, "malformed expression node");
}

}  // namespace

Expr partial(const Expr& e, Var v) {
  return derive(e, [&](Var w) {
    return Expr::constant(w == v ? 1 : 0);
  });
}

Expr cartan_apply(const Expr& e, int jet_cap) {
  if (e.max_order() >= jet_cap)
    raise(ErrorKind::TruncationOverflow,
          "total derivative would exceed jet order cap " + std::to_string(jet_cap));
  return derive(e, [&](Var w) { return Expr::var(w.base, w.order + 1); });
}

Expr cartan_apply_n(const Expr& e, int times, int jet_cap) {
  Expr out = e;
  for (int i = 0; i < times; ++i) out = cartan_apply(out, jet_cap);
  return out;
}

Expr substitute(const Expr& e, const std::map<Var, Expr>& repl) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant:
      return e;
    case Kind::Variable: {
      auto it = repl.find(n.var);
      return it == repl.end() ? e : it->second;
    }
    case Kind::Sum:
    case Kind::Product:
    case Kind::Call: {
      ExprVec kids;
      kids.reserve(n.kids.size());
      for (const Expr& k : n.kids) kids.push_back(substitute(k, repl));
      if (n.kind == Kind::Sum) return Expr::sum(std::move(kids));
      if (n.kind == Kind::Product) return Expr::product(std::move(kids));
      return Expr::call(n.fn, std::move(kids));
    }
    case Kind::Power:
      return Expr::pow(substitute(n.kids[0], repl), n.expo);
  }
  raise(ErrorKind::DomainError, "malformed expression node");
}

Expr monic(const Expr& e) {
  const ExprNode& n = e.node();
  Rational lead(1);
  if (n.kind == Kind::Constant) {
    lead = n.value;
  } else if (n.kind == Kind::Product && n.kids[0].is_constant()) {
    lead = n.kids[0].node().value;
  } else if (n.kind == Kind::Sum) {
    const ExprNode& first = n.kids[0].node();
    if (first.kind == Kind::Constant)
      lead = first.value;
    else if (first.kind == Kind::Product && first.kids[0].is_constant())
      lead = first.kids[0].node().value;
  }
  if (lead.is_one() || lead.is_zero()) return e;
  return Expr::product({Expr::constant(Rational(1) / lead), e});
}

}  // namespace flatlas
