#include "flatlas/ore.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "json.hpp"

namespace flatlas {

namespace {

std::int64_t binom(int n, int k) {
  std::int64_t r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace

OrePoly OrePoly::from_coeffs(ExprVec coeffs) {
  OrePoly p;
  for (Expr& c : coeffs) c = simplify(c);
  while (!coeffs.empty() && coeffs.back().is_zero()) coeffs.pop_back();
  p.coeffs_ = std::move(coeffs);
  return p;
}

OrePoly OrePoly::tau(int degree) { return monomial(Expr::constant(1), degree); }

OrePoly OrePoly::monomial(const Expr& coeff, int degree) {
  ExprVec cs(static_cast<std::size_t>(degree) + 1, Expr::constant(0));
  cs.back() = coeff;
  return from_coeffs(std::move(cs));
}

Expr OrePoly::leading() const {
  if (is_zero()) return Expr::constant(0);
  return coeffs_.back();
}

bool OrePoly::same(const OrePoly& other) const {
  if (degree() != other.degree()) return false;
  for (std::size_t i = 0; i < coeffs_.size(); ++i)
    if (!coeffs_[i].same(other.coeffs_[i])) return false;
  return true;
}

OrePoly operator+(const OrePoly& a, const OrePoly& b) {
  ExprVec cs(std::max(a.coeffs_.size(), b.coeffs_.size()), Expr::constant(0));
  for (std::size_t i = 0; i < cs.size(); ++i)
    cs[i] = a.coeff(static_cast<int>(i)) + b.coeff(static_cast<int>(i));
  return OrePoly::from_coeffs(std::move(cs));
}

OrePoly operator-(const OrePoly& a, const OrePoly& b) { return a + (-b); }

OrePoly operator-(const OrePoly& a) {
  ExprVec cs = a.coeffs_;
  for (Expr& c : cs) c = -c;
  return OrePoly::from_coeffs(std::move(cs));
}

OrePoly ore_mul(const OrePoly& p, const OrePoly& q, int jet_cap) {
  if (p.is_zero() || q.is_zero()) return OrePoly{};
  ExprVec cs(static_cast<std::size_t>(p.degree() + q.degree()) + 1, Expr::constant(0));
  for (int i = 0; i <= p.degree(); ++i) {
    if (p.coeff(i).is_zero()) continue;
    for (int j = 0; j <= q.degree(); ++j) {
      if (q.coeff(j).is_zero()) continue;
      // tau^i b = sum_k C(i,k) D^k(b) tau^(i-k)
      Expr b = q.coeff(j);
      for (int k = 0; k <= i; ++k) {
        Expr term = Expr::constant(binom(i, k)) * p.coeff(i) * b;
        cs[static_cast<std::size_t>(i - k + j)] =
            cs[static_cast<std::size_t>(i - k + j)] + term;
        if (k < i) b = cartan_apply(b, jet_cap);
      }
    }
  }
  return OrePoly::from_coeffs(std::move(cs));
}

Expr ore_apply(const OrePoly& p, const Expr& e, int jet_cap) {
  Expr acc = Expr::constant(0);
  Expr de = e;
  for (int k = 0; k <= p.degree(); ++k) {
    acc = acc + p.coeff(k) * de;
    if (k < p.degree()) de = cartan_apply(de, jet_cap);
  }
  return simplify(acc);
}

std::string to_string(const OrePoly& p, const NameTable& names) {
  if (p.is_zero()) return "0";
  std::string out;
  for (int k = p.degree(); k >= 0; --k) {
    if (p.coeff(k).is_zero()) continue;
    if (!out.empty()) out += " + ";
    Expr c = p.coeff(k);
    std::string cs = to_string(c, names);
    bool wrap = c.kind() == Kind::Sum || (cs.find(' ') != std::string::npos);
    if (k == 0) {
      out += wrap ? "(" + cs + ")" : cs;
    } else {
      std::string t = k == 1 ? "tau" : "tau^" + std::to_string(k);
      if (c.is_one())
        out += t;
      else
        out += (wrap ? "(" + cs + ")" : cs) + "*" + t;
    }
  }
  return out;
}

OreMatrix OreMatrix::identity(int n) {
  OreMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = OrePoly::identity();
  return m;
}

void OreMatrix::swap_cols(int a, int b) {
  if (a == b) return;
  for (int r = 0; r < rows_; ++r) std::swap(at(r, a), at(r, b));
}

bool OreMatrix::same(const OreMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!entries_[i].same(other.entries_[i])) return false;
  return true;
}

int OreMatrix::max_degree() const {
  int d = 0;
  for (const OrePoly& p : entries_) d = std::max(d, p.degree());
  return d;
}

OreMatrix ore_mul(const OreMatrix& a, const OreMatrix& b, int jet_cap) {
  if (a.cols() != b.rows())
    raise(ErrorKind::Precondition, "ore matrix product dimension mismatch");
  OreMatrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      OrePoly acc;
      for (int k = 0; k < a.cols(); ++k)
        acc = acc + ore_mul(a.at(i, k), b.at(k, j), jet_cap);
      out.at(i, j) = acc;
    }
  return out;
}

OreMatrix operator-(const OreMatrix& a, const OreMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    raise(ErrorKind::Precondition, "ore matrix difference dimension mismatch");
  OreMatrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j) - b.at(i, j);
  return out;
}

std::string ore_matrix_to_json(const OreMatrix& m, const NameTable& names) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  nlohmann::json entries = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) {
      nlohmann::json cell = nlohmann::json::array();
      const OrePoly& p = m.at(r, c);
      for (int k = 0; k <= p.degree(); ++k) cell.push_back(to_string(p.coeff(k), names));
      if (p.is_zero()) cell.push_back("0");
      row.push_back(cell);
    }
    entries.push_back(row);
  }
  j["entries"] = entries;
  return j.dump(2);
}

OreMatrix ore_matrix_from_json(const std::string& text, const NameTable& names) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorKind::ParseError, std::string("bad matrix JSON: ") + e.what());
  }
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("entries"))
    raise(ErrorKind::ParseError, "matrix JSON needs rows/cols/entries");
  OreMatrix m(j["rows"].get<int>(), j["cols"].get<int>());
  const auto& entries = j["entries"];
  if (static_cast<int>(entries.size()) != m.rows())
    raise(ErrorKind::ParseError, "matrix JSON row count mismatch");
  for (int r = 0; r < m.rows(); ++r) {
    if (static_cast<int>(entries[r].size()) != m.cols())
      raise(ErrorKind::ParseError, "matrix JSON column count mismatch");
    for (int c = 0; c < m.cols(); ++c) {
      ExprVec coeffs;
      for (const auto& s : entries[r][c])
        coeffs.push_back(parse_expr(s.get<std::string>(), names));
      m.at(r, c) = OrePoly::from_coeffs(std::move(coeffs));
    }
  }
  return m;
}

// ---- elimination -------------------------------------------------------

namespace {

void record_locus(std::vector<Expr>& locus, const Expr& divisor) {
  Expr s = simplify(divisor);
  if (s.is_constant()) return;
  Fraction f = as_fraction(s);
  Expr gen = monic(simplify(f.num));
  if (gen.is_constant()) return;
  for (const Expr& g : locus)
    if (g.same(gen)) return;
  locus.push_back(gen);
}

struct Elimination {
  OreMatrix W;
  OreMatrix U;
  std::vector<Expr> locus;
  const PivotOrder& order;
  int jet_cap;
  int degree_cap;

  Elimination(const OreMatrix& M, const PivotOrder& ord, int cap)
      : W(M), U(OreMatrix::identity(M.cols())), order(ord), jet_cap(cap) {
    degree_cap = 2 * std::max(1, M.max_degree()) * std::min(M.rows(), M.cols()) + 2;
  }

  int pref_rank(int col) const {
    for (std::size_t i = 0; i < order.preference.size(); ++i)
      if (order.preference[i] == col) return static_cast<int>(i);
    return static_cast<int>(order.preference.size());
  }

  // col_c -= col_r * q, applied to W and U alike
  void col_addmul(int c, int r, const OrePoly& q) {
    for (int i = 0; i < W.rows(); ++i)
      W.at(i, c) = W.at(i, c) - ore_mul(W.at(i, r), q, jet_cap);
    for (int i = 0; i < U.rows(); ++i)
      U.at(i, c) = U.at(i, c) - ore_mul(U.at(i, r), q, jet_cap);
    for (int i = 0; i < W.rows(); ++i)
      if (W.at(i, c).degree() > degree_cap)
        raise(ErrorKind::EliminationStall,
              "intermediate degree exceeded cap " + std::to_string(degree_cap));
  }

  void col_scale(int c, const OrePoly& q) {
    for (int i = 0; i < W.rows(); ++i) W.at(i, c) = ore_mul(W.at(i, c), q, jet_cap);
    for (int i = 0; i < U.rows(); ++i) U.at(i, c) = ore_mul(U.at(i, c), q, jet_cap);
  }

  void swap_cols(int a, int b) {
    W.swap_cols(a, b);
    U.swap_cols(a, b);
  }

  // Reduce W(row, c) against the pivot at (row, row) until its degree drops
  // below the pivot degree. Exact for degree-0 pivots.
  void reduce_entry(int row, int c) {
    while (!W.at(row, c).is_zero() &&
           W.at(row, c).degree() >= W.at(row, row).degree()) {
      int before = W.at(row, c).degree();
      int d = before - W.at(row, row).degree();
      Expr pivot_lead = W.at(row, row).leading();
      Expr g = simplify(W.at(row, c).leading() / pivot_lead);
      record_locus(locus, pivot_lead);
      col_addmul(c, row, OrePoly::monomial(g, d));
      if (!W.at(row, c).is_zero() && W.at(row, c).degree() >= before)
        raise(ErrorKind::EliminationStall,
              "leading coefficient did not cancel; entry outside the supported fragment");
    }
  }

  void echelon() {
    for (int r = 0; r < W.rows(); ++r) {
      while (true) {
        int pick = -1;
        auto key = [&](int col) {
          const OrePoly& p = W.at(r, col);
          int tie = order.preference.empty() ? p.leading().node_count()
                                             : pref_rank(col);
          return std::tuple<int, int, int>(p.degree(), tie, col);
        };
        for (int c = r; c < W.cols(); ++c) {
          if (W.at(r, c).is_zero()) continue;
          if (pick < 0 || key(c) < key(pick)) pick = c;
        }
        if (pick < 0)
          raise(ErrorKind::EliminationStall,
                "zero row " + std::to_string(r) + ": matrix is structurally degenerate");
        swap_cols(r, pick);
        bool leftover = false;
        for (int c = r + 1; c < W.cols(); ++c) {
          reduce_entry(r, c);
          if (!W.at(r, c).is_zero()) leftover = true;
        }
        if (!leftover) break;
        // Remainders of smaller degree exist; the pivot search promotes one.
      }
    }
  }

  void run() {
    for (int restart = 0;; ++restart) {
      if (restart > 64)
        raise(ErrorKind::EliminationStall, "diagonalization did not converge");
      echelon();
      bool swapped = false;
      for (int r2 = 1; r2 < W.rows() && !swapped; ++r2) {
        for (int c = 0; c < r2 && !swapped; ++c) {
          reduce_entry(r2, c);
          if (!W.at(r2, c).is_zero()) {
            // Non-exact division (pivot of positive degree): move the smaller
            // remainder onto the diagonal and re-run.
            swap_cols(c, r2);
            swapped = true;
          }
        }
      }
      if (!swapped) return;
    }
  }
};

}  // namespace

DecompositionResult smith_jacobson(const OreMatrix& M, const PivotOrder& order,
                                   int jet_cap) {
  if (M.rows() == 0 || M.cols() == 0)
    raise(ErrorKind::Precondition, "smith_jacobson expects a non-empty matrix");
  if (M.rows() > M.cols())
    raise(ErrorKind::Precondition, "smith_jacobson expects rows <= cols");

  Elimination e(M, order, jet_cap);
  e.run();

  DecompositionResult out;
  out.hyper_regular = true;
  for (int r = 0; r < M.rows(); ++r)
    if (e.W.at(r, r).degree() != 0) out.hyper_regular = false;

  if (out.hyper_regular) {
    for (int r = 0; r < M.rows(); ++r) {
      Expr d = e.W.at(r, r).coeff(0);
      if (!d.is_one()) {
        record_locus(e.locus, d);
        e.col_scale(r, OrePoly(simplify(Expr::constant(1) / d)));
      }
    }
    out.delta = OreMatrix::identity(M.rows());
  } else {
    out.delta = OreMatrix(M.rows(), M.rows());
    for (int r = 0; r < M.rows(); ++r) out.delta.at(r, r) = e.W.at(r, r);
  }
  out.U = std::move(e.U);
  out.locus = std::move(e.locus);
  return out;
}

namespace {

double sampled_max_abs(const Expr& e, int trials, std::uint64_t seed) {
  Rng rng(seed);
  std::set<Var> vars = e.vars();
  double mx = 0.0;
  int done = 0, attempts = 0;
  while (done < trials && ++attempts < trials * 64) {
    Binding b = sample_uniform(vars, rng);
    try {
      mx = std::max(mx, std::abs(eval(e, b, kPoleGuard)));
    } catch (const Error&) {
      continue;
    }
    ++done;
  }
  return mx;
}

}  // namespace

UnimodularResult unimodular_check(const OreMatrix& U, int trials, double tol,
                                  std::uint64_t seed, int jet_cap) {
  if (U.rows() != U.cols())
    raise(ErrorKind::Precondition, "unimodular_check expects a square matrix");
  DecompositionResult d;
  try {
    d = smith_jacobson(U, {}, jet_cap);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::EliminationStall)
      raise(ErrorKind::NotUnimodular, std::string("elimination failed: ") + e.what());
    throw;
  }
  if (!d.hyper_regular)
    raise(ErrorKind::NotUnimodular,
          "elimination left a diagonal entry of positive tau-degree");

  UnimodularResult out;
  out.inverse = d.U;
  out.verified = true;
  OreMatrix lhs = ore_mul(U, d.U, jet_cap) - OreMatrix::identity(U.rows());
  OreMatrix rhs = ore_mul(d.U, U, jet_cap) - OreMatrix::identity(U.rows());
  for (const OreMatrix* m : {&lhs, &rhs}) {
    for (int i = 0; i < m->rows(); ++i)
      for (int j = 0; j < m->cols(); ++j)
        for (const Expr& c : m->at(i, j).coeffs()) {
          if (c.is_zero()) continue;
          if (!is_zero_modulo(c, {}, trials, tol, seed)) out.verified = false;
          out.max_residual = std::max(out.max_residual, sampled_max_abs(c, trials, seed));
        }
  }
  return out;
}

OreMatrix kernel_completion(const OreMatrix& M, const OreMatrix& K, std::uint64_t seed,
                            int jet_cap) {
  const int r = M.rows(), c = M.cols(), k = K.cols();
  if (K.rows() != c)
    raise(ErrorKind::Precondition, "kernel_completion: K row count must match M cols");
  if (k != c - r)
    raise(ErrorKind::NotCompletable,
          "kernel_completion supports exactly cols-rows kernel columns");

  // Precondition: M*K = 0 as an Ore identity.
  OreMatrix prod = ore_mul(M, K, jet_cap);
  for (int i = 0; i < prod.rows(); ++i)
    for (int j = 0; j < prod.cols(); ++j)
      for (const Expr& coeff : prod.at(i, j).coeffs())
        if (!coeff.is_zero() &&
            !is_zero_modulo(coeff, {}, kDefaultZeroTrials, kDefaultZeroTol, seed))
          raise(ErrorKind::Precondition, "kernel_completion: M*K != 0");

  DecompositionResult d = smith_jacobson(M, {}, jet_cap);
  if (!d.hyper_regular)
    raise(ErrorKind::NotCompletable, "base matrix is not hyper-regular");
  UnimodularResult inv =
      unimodular_check(d.U, kDefaultZeroTrials, kDefaultZeroTol, seed, jet_cap);
  OreMatrix W = ore_mul(inv.inverse, K, jet_cap);

  // Rows above the kernel block must vanish (they equal delta^{-1} * M * K).
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < k; ++j) {
      const OrePoly& p = W.at(i, j);
      bool zero = true;
      for (const Expr& coeff : p.coeffs())
        if (!coeff.is_zero() &&
            !is_zero_modulo(coeff, {}, kDefaultZeroTrials, kDefaultZeroTol, seed))
          zero = false;
      if (!zero)
        raise(ErrorKind::NotCompletable, "K does not lie in the kernel of M");
      W.at(i, j) = OrePoly{};
    }

  OreMatrix bot(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) bot.at(i, j) = W.at(r + i, j);
  try {
    unimodular_check(bot, kDefaultZeroTrials, kDefaultZeroTol, seed, jet_cap);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotUnimodular)
      raise(ErrorKind::NotCompletable,
            std::string("kernel columns are dependent: ") + e.what());
    throw;
  }

  OreMatrix block = OreMatrix::identity(c);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) block.at(r + i, r + j) = bot.at(i, j);
  return ore_mul(d.U, block, jet_cap);
}

namespace {

bool locus_includes(const std::vector<Expr>& small, const std::vector<Expr>& big,
                    std::uint64_t seed) {
  for (const Expr& a : small) {
    bool found = false;
    for (const Expr& b : big)
      if (equivalent_generators(a, b, seed)) {
        found = true;
        break;
      }
    if (!found) return false;
  }
  return true;
}

std::vector<Expr> dedupe_locus(const std::vector<Expr>& locus, std::uint64_t seed) {
  std::vector<Expr> out;
  for (const Expr& g : locus) {
    bool dup = false;
    for (const Expr& h : out)
      if (equivalent_generators(g, h, seed)) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(g);
  }
  return out;
}

}  // namespace

LocusReport hyper_regular_locus(const OreMatrix& M, int max_strategies, Execution exec,
                                std::uint64_t seed, int jet_cap) {
  if (max_strategies < 0)
    raise(ErrorKind::Precondition, "pivot strategy count must be >= 0 (0 = auto)");
  const int cols = M.cols();

  std::vector<PivotOrder> orders;
  orders.push_back({});  // degree + node-count heuristic
  if (cols <= 4) {
    std::vector<int> perm(static_cast<std::size_t>(cols));
    std::iota(perm.begin(), perm.end(), 0);
    do {
      orders.push_back({perm});
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    Rng rng(seed);
    for (int i = 0; i < 24; ++i) {
      std::vector<int> perm(static_cast<std::size_t>(cols));
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t j = perm.size(); j > 1; --j)
        std::swap(perm[j - 1], perm[rng.next() % j]);
      orders.push_back({perm});
    }
  }
  if (max_strategies > 0 && static_cast<int>(orders.size()) > max_strategies)
    orders.resize(static_cast<std::size_t>(max_strategies));

  LocusReport report;
  report.outcomes.resize(orders.size());
  std::vector<std::exception_ptr> fatal(orders.size());
  for_each_index(orders.size(), exec, [&](std::size_t i) {
    StrategyOutcome& out = report.outcomes[i];
    out.preference = orders[i].preference;
    try {
      DecompositionResult d = smith_jacobson(M, orders[i], jet_cap);
      out.locus = dedupe_locus(d.locus, seed);
      out.hyper_regular = d.hyper_regular;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::EliminationStall) {
        out.failed = true;
        out.message = e.what();
      } else {
        fatal[i] = std::current_exception();
      }
    } catch (...) {
      fatal[i] = std::current_exception();
    }
  });
  for (const auto& err : fatal)
    if (err) std::rethrow_exception(err);

  int best = -1;
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const StrategyOutcome& cand = report.outcomes[i];
    if (cand.failed) continue;
    bool minimal = true;
    for (const StrategyOutcome& other : report.outcomes) {
      if (other.failed) continue;
      if (locus_includes(other.locus, cand.locus, seed) &&
          !locus_includes(cand.locus, other.locus, seed)) {
        minimal = false;  // strictly smaller locus exists
        break;
      }
    }
    if (!minimal) continue;
    if (best < 0 || cand.locus.size() < report.outcomes[best].locus.size())
      best = static_cast<int>(i);
  }
  if (best < 0) {
    for (const StrategyOutcome& out : report.outcomes)
      if (out.failed) raise(ErrorKind::EliminationStall, out.message);
    raise(ErrorKind::EliminationStall, "no pivot strategy succeeded");
  }
  report.locus = report.outcomes[best].locus;
  report.hyper_regular = report.outcomes[best].hyper_regular;
  report.chosen_strategy = best;
  return report;
}

}  // namespace flatlas
