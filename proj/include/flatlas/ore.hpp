#ifndef FLATLAS_ORE_HPP
#define FLATLAS_ORE_HPP

#include <string>
#include <vector>

#include "flatlas/expr.hpp"
#include "flatlas/parallel.hpp"
#include "flatlas/parse.hpp"
#include "flatlas/sampling.hpp"

namespace flatlas {

// Skew polynomial in the total-derivative operator with expression
// coefficients and commutation rule  tau * a = a * tau + D(a).
// Coefficients are stored lowest degree first, simplified, and trimmed so the
// leading coefficient is never the literal zero. The zero polynomial has an
// empty coefficient list and degree() == -1.
class OrePoly {
 public:
  OrePoly() = default;
  explicit OrePoly(const Expr& constant_coeff)
      : OrePoly(from_coeffs({constant_coeff})) {}

  static OrePoly from_coeffs(ExprVec coeffs);
  static OrePoly tau(int degree = 1);
  static OrePoly monomial(const Expr& coeff, int degree);
  static OrePoly identity() { return OrePoly(Expr::constant(1)); }

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  bool is_zero() const { return coeffs_.empty(); }
  const ExprVec& coeffs() const { return coeffs_; }
  Expr coeff(int k) const {
    return k >= 0 && k <= degree() ? coeffs_[k] : Expr::constant(0);
  }
  Expr leading() const;

  bool same(const OrePoly& other) const;
  bool is_identity() const { return degree() == 0 && coeffs_[0].is_one(); }

  friend OrePoly operator+(const OrePoly& a, const OrePoly& b);
  friend OrePoly operator-(const OrePoly& a, const OrePoly& b);
  friend OrePoly operator-(const OrePoly& a);

 private:
  ExprVec coeffs_;
};

// Non-commutative product; degrees add whenever the leading-coefficient
// product does not vanish identically.
OrePoly ore_mul(const OrePoly& p, const OrePoly& q, int jet_cap = kDefaultJetCap);

// Action on an expression: sum_k coeff_k * D^k(e).
Expr ore_apply(const OrePoly& p, const Expr& e, int jet_cap = kDefaultJetCap);

std::string to_string(const OrePoly& p, const NameTable& names = {});

class OreMatrix {
 public:
  OreMatrix() = default;
  OreMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), entries_(static_cast<std::size_t>(rows * cols)) {}

  static OreMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  OrePoly& at(int r, int c) { return entries_[static_cast<std::size_t>(r * cols_ + c)]; }
  const OrePoly& at(int r, int c) const {
    return entries_[static_cast<std::size_t>(r * cols_ + c)];
  }

  void swap_cols(int a, int b);
  bool same(const OreMatrix& other) const;
  int max_degree() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<OrePoly> entries_;
};

OreMatrix ore_mul(const OreMatrix& a, const OreMatrix& b, int jet_cap = kDefaultJetCap);
OreMatrix operator-(const OreMatrix& a, const OreMatrix& b);

std::string ore_matrix_to_json(const OreMatrix& m, const NameTable& names = {});
OreMatrix ore_matrix_from_json(const std::string& text, const NameTable& names = {});

// Pivot policy for the diagonal decomposition. Pivots always have minimal
// tau-degree; `preference` permutes which column wins among equal-degree
// candidates (empty = smallest node count, then column index).
struct PivotOrder {
  std::vector<int> preference;
};

struct DecompositionResult {
  OreMatrix U;          // cols x cols, product of elementary column operations
  OreMatrix delta;      // rows x rows diagonal; identity when hyper_regular
  std::vector<Expr> locus;  // divisors recorded during elimination (monic numerators)
  bool hyper_regular = false;
};

// Column-operation Smith-Jacobson decomposition: M * U = [delta | 0]. Every
// division by a pivot coefficient appends that coefficient's numerator to
// the locus; off the locus U is unimodular. hyper_regular means all diagonal
// entries came out degree 0, in which case U is normalized so delta = I.
DecompositionResult smith_jacobson(const OreMatrix& M, const PivotOrder& order = {},
                                   int jet_cap = kDefaultJetCap);

struct UnimodularResult {
  bool verified = false;
  OreMatrix inverse;
  double max_residual = 0.0;
};

// Two-sided polynomial inversion by Ore-Gaussian elimination, then a
// randomized check of U*V = V*U = I entry by entry. Throws NotUnimodular
// when elimination leaves a diagonal entry of positive degree.
UnimodularResult unimodular_check(const OreMatrix& U, int trials = kDefaultZeroTrials,
                                  double tol = kDefaultZeroTol,
                                  std::uint64_t seed = kDefaultSeed,
                                  int jet_cap = kDefaultJetCap);

// Completes kernel columns K (with M*K = 0) to a unimodular U whose last
// columns are exactly K, certifying K as the variational part of a flat
// output candidate.
OreMatrix kernel_completion(const OreMatrix& M, const OreMatrix& K,
                            std::uint64_t seed = kDefaultSeed,
                            int jet_cap = kDefaultJetCap);

struct StrategyOutcome {
  std::vector<int> preference;  // empty = default heuristic order
  std::vector<Expr> locus;
  bool hyper_regular = false;
  bool failed = false;
  std::string message;
};

struct LocusReport {
  std::vector<Expr> locus;  // minimal under set inclusion across strategies
  bool hyper_regular = false;
  int chosen_strategy = -1;
  std::vector<StrategyOutcome> outcomes;
};

// Re-runs the decomposition under distinct pivot orderings (all column
// permutations when cols <= 4, else 24 seeded random ones; max_strategies
// caps the count, 0 = automatic) and reports the smallest locus found: the
// best available outer approximation of the hyper-singular set.
LocusReport hyper_regular_locus(const OreMatrix& M, int max_strategies = 0,
                                Execution exec = Execution::Parallel,
                                std::uint64_t seed = kDefaultSeed,
                                int jet_cap = kDefaultJetCap);

}  // namespace flatlas

#endif  // FLATLAS_ORE_HPP
