#include <algorithm>
#include <map>
#include <vector>

#include "flatlas/expr.hpp"

namespace flatlas {

namespace {

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const {
    return Expr::compare(a, b) < 0;
  }
};

constexpr int kExpandNodeBudget = 20000;
constexpr int kPowerExpandCap = 8;

struct BudgetExceeded {};

void check_budget(const Expr& e) {
  if (e.node_count() > kExpandNodeBudget) throw BudgetExceeded{};
}

// Distributes products over sums and expands small positive integer powers
// of sums. Negative powers and call arguments are left as atoms.
Expr expand(const Expr& e) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant:
    case Kind::Variable:
    case Kind::Call:
      return e;
    case Kind::Sum: {
      ExprVec kids;
      for (const Expr& k : n.kids) kids.push_back(expand(k));
      Expr out = Expr::sum(std::move(kids));
      check_budget(out);
      return out;
    }
    case Kind::Power: {
      Expr base = expand(n.kids[0]);
      if (n.expo >= 2 && n.expo <= kPowerExpandCap && base.kind() == Kind::Sum) {
        Expr acc = base;
        for (int i = 1; i < n.expo; ++i) {
          acc = expand(acc * base);
          check_budget(acc);
        }
        return acc;
      }
      return Expr::pow(base, n.expo);
    }
    case Kind::Product: {
      std::vector<Expr> terms{Expr::constant(1)};
      for (const Expr& kid : n.kids) {
        Expr f = expand(kid);
        std::vector<Expr> next;
        if (f.kind() == Kind::Sum) {
          for (const Expr& t : terms)
            for (const Expr& s : f.node().kids) next.push_back(t * s);
        } else {
          for (const Expr& t : terms) next.push_back(t * f);
        }
        terms = std::move(next);
        int total = 0;
        for (const Expr& t : terms) total += t.node_count();
        if (total > kExpandNodeBudget) throw BudgetExceeded{};
      }
      return Expr::sum(std::move(terms));
    }
  }
  return e;
}

// Factor-exponent view of a term: rational coefficient times a monomial in
// atoms (variables, calls, sum-powers).
struct Mono {
  Rational coeff{1};
  std::map<Expr, int, ExprLess> factors;
};

Mono decompose(const Expr& e) {
  Mono m;
  const ExprNode& n = e.node();
  auto add_factor = [&](const Expr& f) {
    if (f.is_constant()) {
      m.coeff = m.coeff * f.node().value;
    } else if (f.kind() == Kind::Power) {
      m.factors[f.node().kids[0]] += f.node().expo;
    } else {
      m.factors[f] += 1;
    }
  };
  if (n.kind == Kind::Product) {
    for (const Expr& k : n.kids) add_factor(k);
  } else {
    add_factor(e);
  }
  return m;
}

Expr recompose(const Mono& m) {
  ExprVec kids{Expr::constant(m.coeff)};
  for (const auto& [base, e] : m.factors)
    if (e != 0) kids.push_back(Expr::pow(base, e));
  return Expr::product(std::move(kids));
}

bool is_call(const Expr& e, Fn fn) {
  return e.kind() == Kind::Call && e.node().fn == fn;
}

// sin^2(u) + cos^2(u) collapsing inside one sum: terms T*sin(u)^2 and
// T*cos(u)^2 merge into T (with the coefficient mismatch left on the cosine
// term). Applied to fixpoint.
Expr collapse_sum(const Expr& e) {
  if (e.kind() != Kind::Sum) return e;
  std::vector<Mono> terms;
  for (const Expr& k : e.node().kids) terms.push_back(decompose(k));

  auto term_key = [](const Mono& m) {
    Mono copy = m;
    copy.coeff = Rational(1);
    return recompose(copy);
  };

  bool changed = true;
  int guard = 0;
  while (changed && ++guard < 200) {
    changed = false;
    for (std::size_t i = 0; i < terms.size() && !changed; ++i) {
      for (const auto& [base, expo] : terms[i].factors) {
        if (expo < 2 || !is_call(base, Fn::Sin)) continue;
        Expr u = base.node().kids[0];
        Expr cos_u = Expr::cos(u);
        Mono partner = terms[i];
        partner.factors[base] -= 2;
        if (partner.factors[base] == 0) partner.factors.erase(base);
        Mono core = partner;  // T = term / sin^2
        partner.factors[cos_u] += 2;
        Expr want = term_key(partner);
        for (std::size_t j = 0; j < terms.size(); ++j) {
          if (j == i) continue;
          if (!term_key(terms[j]).same(want)) continue;
          Rational ci = terms[i].coeff;
          Rational cj = terms[j].coeff;
          core.coeff = ci;
          std::vector<Mono> next;
          for (std::size_t k = 0; k < terms.size(); ++k)
            if (k != i && k != j) next.push_back(terms[k]);
          next.push_back(core);
          if (!(cj - ci).is_zero()) {
            Mono rest = terms[j];
            rest.coeff = cj - ci;
            next.push_back(rest);
          }
          terms = std::move(next);
          changed = true;
          break;
        }
        if (changed) break;
      }
    }
  }

  ExprVec kids;
  for (const Mono& m : terms) kids.push_back(recompose(m));
  return Expr::sum(std::move(kids));
}

Expr collapse_tree(const Expr& e) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant:
    case Kind::Variable:
      return e;
    case Kind::Call: {
      ExprVec kids;
      for (const Expr& k : n.kids) kids.push_back(collapse_tree(k));
      return Expr::call(n.fn, std::move(kids));
    }
    case Kind::Power:
      return Expr::pow(collapse_tree(n.kids[0]), n.expo);
    case Kind::Product: {
      ExprVec kids;
      for (const Expr& k : n.kids) kids.push_back(collapse_tree(k));
      return Expr::product(std::move(kids));
    }
    case Kind::Sum: {
      ExprVec kids;
      for (const Expr& k : n.kids) kids.push_back(collapse_tree(k));
      return collapse_sum(Expr::sum(std::move(kids)));
    }
  }
  return e;
}

Fraction fraction_of(const Expr& e);

Fraction fraction_of_sum(const ExprNode& n) {
  std::vector<Fraction> parts;
  parts.reserve(n.kids.size());
  for (const Expr& k : n.kids) parts.push_back(fraction_of(k));

  // Least common denominator over the factored denominators.
  std::map<Expr, int, ExprLess> lcm;
  for (const Fraction& f : parts) {
    Mono d = decompose(f.den);
    for (const auto& [base, expo] : d.factors)
      lcm[base] = std::max(lcm[base], expo);
  }
  ExprVec num_terms;
  for (const Fraction& f : parts) {
    Mono d = decompose(f.den);
    ExprVec fac{f.num, Expr::constant(Rational(1) / d.coeff)};
    for (const auto& [base, expo] : lcm) {
      int have = 0;
      if (auto it = d.factors.find(base); it != d.factors.end()) have = it->second;
      if (expo - have != 0) fac.push_back(Expr::pow(base, expo - have));
    }
    num_terms.push_back(Expr::product(std::move(fac)));
  }
  ExprVec den_fac;
  for (const auto& [base, expo] : lcm)
    if (expo != 0) den_fac.push_back(Expr::pow(base, expo));
  return {Expr::sum(std::move(num_terms)), Expr::product(std::move(den_fac))};
}

Fraction fraction_of(const Expr& e) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant:
    case Kind::Variable:
    case Kind::Call:
      return {e, Expr::constant(1)};
    case Kind::Power: {
      Fraction b = fraction_of(n.kids[0]);
      if (n.expo > 0)
        return {Expr::pow(b.num, n.expo), Expr::pow(b.den, n.expo)};
      return {Expr::pow(b.den, -n.expo), Expr::pow(b.num, -n.expo)};
    }
    case Kind::Product: {
      Fraction acc{Expr::constant(1), Expr::constant(1)};
      for (const Expr& k : n.kids) {
        Fraction f = fraction_of(k);
        acc.num = acc.num * f.num;
        acc.den = acc.den * f.den;
      }
      return acc;
    }
    case Kind::Sum:
      return fraction_of_sum(n);
  }
  return {e, Expr::constant(1)};
}

// Greatest common monomial across the terms of an expanded sum.
Mono monomial_gcd(const Expr& e) {
  std::vector<Mono> terms;
  if (e.kind() == Kind::Sum) {
    for (const Expr& k : e.node().kids) terms.push_back(decompose(k));
  } else {
    terms.push_back(decompose(e));
  }
  Mono g = terms[0];
  g.coeff = Rational(1);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    for (auto it = g.factors.begin(); it != g.factors.end();) {
      auto jt = terms[i].factors.find(it->first);
      int other = jt == terms[i].factors.end() ? 0 : jt->second;
      int m = std::min(it->second, other);
      if (m <= 0)
        it = g.factors.erase(it);
      else
        (it++)->second = m;
    }
  }
  return g;
}

Expr divide_by_monomial(const Expr& e, const Mono& g) {
  ExprVec inv;
  inv.push_back(e);
  for (const auto& [base, expo] : g.factors) inv.push_back(Expr::pow(base, -expo));
  return expand(Expr::product(std::move(inv)));
}

Expr normalize_rational(const Expr& e) {
  Fraction f = fraction_of(e);
  Expr num = collapse_tree(expand(f.num));
  Mono den = decompose(collapse_tree(f.den));  // stays factored

  if (num.is_zero()) return Expr::constant(0);

  // Cancel the common monomial part of the numerator against denominator
  // factors; then cancel a whole matching sum factor if one is left.
  Mono g = monomial_gcd(num);
  Mono canceled;
  for (auto& [base, expo] : g.factors) {
    auto it = den.factors.find(base);
    if (it == den.factors.end() || it->second <= 0) continue;
    int m = std::min(expo, it->second);
    it->second -= m;
    canceled.factors[base] = m;
  }
  if (!canceled.factors.empty()) num = divide_by_monomial(num, canceled);

  for (auto& [base, expo] : den.factors) {
    if (expo <= 0 || base.kind() != Kind::Sum) continue;
    if (num.same(base)) {
      num = Expr::constant(1);
      --expo;
    }
  }

  ExprVec out{num, Expr::constant(Rational(1) / den.coeff)};
  for (const auto& [base, expo] : den.factors)
    if (expo != 0) out.push_back(Expr::pow(base, -expo));
  return Expr::product(std::move(out));
}

Expr rebuild(const Expr& e) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case Kind::Constant:
    case Kind::Variable:
      return e;
    case Kind::Call: {
      ExprVec kids;
      for (const Expr& k : n.kids) kids.push_back(rebuild(k));
      return Expr::call(n.fn, std::move(kids));
    }
    case Kind::Power:
      return Expr::pow(rebuild(n.kids[0]), n.expo);
    case Kind::Product: {
      ExprVec kids;
      for (const Expr& k : n.kids) kids.push_back(rebuild(k));
      return Expr::product(std::move(kids));
    }
    case Kind::Sum: {
      ExprVec kids;
      for (const Expr& k : n.kids) kids.push_back(rebuild(k));
      return Expr::sum(std::move(kids));
    }
  }
  return e;
}

}  // namespace

Fraction as_fraction(const Expr& e) {
  try {
    Fraction f = fraction_of(rebuild(e));
    f.num = expand(f.num);
    return f;
  } catch (const BudgetExceeded&) {
    return {e, Expr::constant(1)};
  }
}

Expr simplify(const Expr& e) {
  Expr canonical = collapse_tree(rebuild(e));
  try {
    return collapse_tree(normalize_rational(canonical));
  } catch (const BudgetExceeded&) {
    return canonical;
  }
}

}  // namespace flatlas
