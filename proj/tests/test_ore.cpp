#include "doctest.h"

#include <cmath>

#include "flatlas/ore.hpp"
#include "flatlas/system.hpp"

using namespace flatlas;

namespace {

const NameTable kCar({"x", "y", "theta"});

Expr car_expr(const std::string& s) { return parse_expr(s, kCar); }

OrePoly poly(const std::string& c0) { return OrePoly(car_expr(c0)); }
OrePoly poly(const std::string& c0, const std::string& c1) {
  return OrePoly::from_coeffs({car_expr(c0), car_expr(c1)});
}

// P(F) for the car in the paper's presentation order [A, sin tau, -cos tau];
// a single column permutation away from p_matrix(car).
OreMatrix car_p_permuted() {
  OreMatrix M(1, 3);
  M.at(0, 0) = poly("x'*cos(theta) + y'*sin(theta)");
  M.at(0, 1) = poly("0", "sin(theta)");
  M.at(0, 2) = poly("0", "-cos(theta)");
  return M;
}

OreMatrix car_p() {
  OreMatrix M(1, 3);
  M.at(0, 0) = poly("0", "sin(theta)");
  M.at(0, 1) = poly("0", "-cos(theta)");
  M.at(0, 2) = poly("x'*cos(theta) + y'*sin(theta)");
  return M;
}

bool is_zero_poly_sampled(const OrePoly& p) {
  for (const Expr& c : p.coeffs())
    if (!c.is_zero() && !is_zero_modulo(c)) return false;
  return true;
}

bool matrices_equal_sampled(const OreMatrix& a, const OreMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (!is_zero_poly_sampled(a.at(i, j) - b.at(i, j))) return false;
  return true;
}

OrePoly random_poly(Rng& rng) {
  ExprVec cs;
  int deg = static_cast<int>(rng.next() % 3);
  for (int k = 0; k <= deg; ++k) {
    std::uint64_t pick = rng.next() % 4;
    Expr c = Expr::constant(static_cast<int>(rng.next() % 5) - 2);
    if (pick == 1) c = Expr::var(static_cast<int>(rng.next() % 3), 0);
    if (pick == 2) c = Expr::sin(Expr::var(2, 0));
    if (pick == 3)
      c = Expr::var(static_cast<int>(rng.next() % 3), static_cast<int>(rng.next() % 2));
    cs.push_back(c);
  }
  return OrePoly::from_coeffs(std::move(cs));
}

}  // namespace

TEST_CASE("commutation rule: tau through a coefficient") {
  OrePoly lhs = ore_mul(OrePoly::tau(), poly("sin(theta)"));
  CHECK(lhs.degree() == 1);
  CHECK(lhs.coeff(1).same(car_expr("sin(theta)")));
  CHECK(lhs.coeff(0).same(car_expr("theta'*cos(theta)")));
}

TEST_CASE("commutation rule: tau^2 through a coefficient") {
  Expr a = car_expr("x*sin(theta)");
  OrePoly lhs = ore_mul(OrePoly::tau(2), OrePoly(a));
  Expr da = cartan_apply(a);
  OrePoly expect = OrePoly::from_coeffs(
      {cartan_apply(da), Expr::constant(2) * da, a});
  CHECK(lhs.same(expect));
}

TEST_CASE("commutation rule: product of first-degree monomials") {
  Expr a = car_expr("x");
  Expr b = car_expr("y");
  OrePoly lhs = ore_mul(OrePoly::monomial(a, 1), OrePoly::monomial(b, 1));
  OrePoly expect = OrePoly::from_coeffs(
      {Expr::constant(0), a * cartan_apply(b), a * b});
  CHECK(lhs.same(expect));
}

TEST_CASE("ore_apply acts by iterated total derivatives") {
  CHECK(ore_apply(OrePoly::tau(), car_expr("x")).same(car_expr("x'")));
  CHECK(ore_apply(poly("0", "sin(theta)"), car_expr("x"))
            .same(car_expr("x'*sin(theta)")));
  CHECK(ore_apply(OrePoly::tau(2), car_expr("x*y"))
            .same(car_expr("x''*y + 2*x'*y' + x*y''")));
}

TEST_CASE("ore ring axioms hold at sampled jets") {
  Rng rng(kDefaultSeed + 10);
  int done = 0;
  Expr probe = car_expr("x*sin(theta) + y");
  for (int rep = 0; rep < 25; ++rep) {
    OrePoly p = random_poly(rng), q = random_poly(rng), r = random_poly(rng);
    Expr assoc = ore_apply(ore_mul(ore_mul(p, q), r), probe) -
                 ore_apply(ore_mul(p, ore_mul(q, r)), probe);
    Expr distr = ore_apply(ore_mul(p, q + r), probe) -
                 ore_apply(ore_mul(p, q) + ore_mul(p, r), probe);
    Expr compat = ore_apply(ore_mul(p, q), probe) -
                  ore_apply(p, ore_apply(q, probe));
    for (const Expr& e : {assoc, distr, compat}) {
      std::set<Var> vars = e.vars();
      for (int t = 0; t < 3; ++t) {
        Binding b = sample_uniform(vars, rng);
        CHECK(std::abs(eval(e, b)) < 1e-9);
        ++done;
      }
    }
  }
  CHECK(done >= 200);
}

TEST_CASE("decomposition of an already reduced matrix") {
  OreMatrix M(1, 2);
  M.at(0, 0) = OrePoly::identity();
  M.at(0, 1) = OrePoly{};
  DecompositionResult d = smith_jacobson(M);
  CHECK(d.hyper_regular);
  CHECK(d.locus.empty());
  CHECK(d.U.same(OreMatrix::identity(2)));
  CHECK(d.delta.same(OreMatrix::identity(1)));
}

TEST_CASE("decomposition of [tau 1]") {
  OreMatrix M(1, 2);
  M.at(0, 0) = OrePoly::tau();
  M.at(0, 1) = OrePoly::identity();
  DecompositionResult d = smith_jacobson(M);
  CHECK(d.hyper_regular);
  CHECK(d.locus.empty());

  OreMatrix expect(2, 2);
  expect.at(0, 0) = OrePoly{};
  expect.at(0, 1) = OrePoly::identity();
  expect.at(1, 0) = OrePoly::identity();
  expect.at(1, 1) = -OrePoly::tau();
  CHECK(d.U.same(expect));

  OreMatrix prod = ore_mul(M, d.U);
  CHECK(prod.at(0, 0).is_identity());
  CHECK(prod.at(0, 1).is_zero());
}

TEST_CASE("decomposition of the car variational matrix") {
  OreMatrix M = car_p();
  DecompositionResult d = smith_jacobson(M);
  CHECK(d.hyper_regular);
  REQUIRE(d.locus.size() == 1);
  CHECK(d.locus[0].same(car_expr("x'*cos(theta) + y'*sin(theta)")));

  OreMatrix prod = ore_mul(M, d.U);
  CHECK(prod.at(0, 0).is_identity());
  CHECK(prod.at(0, 1).is_zero());
  CHECK(prod.at(0, 2).is_zero());

  CHECK(unimodular_check(d.U).verified);
}

TEST_CASE("elimination reports structurally degenerate input") {
  OreMatrix M(1, 2);  // zero row
  CHECK_THROWS_WITH_AS(smith_jacobson(M), doctest::Contains("EliminationStall"),
                       Error);
}

TEST_CASE("unimodular_check inverts [tau 1]'s transform") {
  OreMatrix U(2, 2);
  U.at(0, 0) = OrePoly{};
  U.at(0, 1) = OrePoly::identity();
  U.at(1, 0) = OrePoly::identity();
  U.at(1, 1) = -OrePoly::tau();
  UnimodularResult r = unimodular_check(U);
  CHECK(r.verified);
  CHECK(r.max_residual < 1e-12);

  OreMatrix expect(2, 2);
  expect.at(0, 0) = OrePoly::tau();
  expect.at(0, 1) = OrePoly::identity();
  expect.at(1, 0) = OrePoly::identity();
  expect.at(1, 1) = OrePoly{};
  CHECK(r.inverse.same(expect));

  CHECK(unimodular_check(OreMatrix::identity(3)).verified);
}

TEST_CASE("unimodular_check rejects tau on the diagonal") {
  OreMatrix U(2, 2);
  U.at(0, 0) = OrePoly::tau();
  U.at(1, 1) = OrePoly::identity();
  CHECK_THROWS_WITH_AS(unimodular_check(U), doctest::Contains("NotUnimodular"),
                       Error);
}

TEST_CASE("the paper certificate for the car is unimodular") {
  // U = [[1/A, -(1/A) tau, thetadot/A], [0, sin, cos], [0, -cos, sin]]
  // against the permuted presentation [A, sin tau, -cos tau].
  Expr A = car_expr("x'*cos(theta) + y'*sin(theta)");
  OreMatrix U(3, 3);
  U.at(0, 0) = OrePoly(Expr::constant(1) / A);
  U.at(0, 1) = OrePoly::monomial(Expr::constant(-1) / A, 1);
  U.at(0, 2) = OrePoly(car_expr("theta'") / A);
  U.at(1, 1) = poly("sin(theta)");
  U.at(1, 2) = poly("cos(theta)");
  U.at(2, 1) = poly("-cos(theta)");
  U.at(2, 2) = poly("sin(theta)");

  UnimodularResult r = unimodular_check(U);
  CHECK(r.verified);

  OreMatrix prod = ore_mul(car_p_permuted(), U);
  CHECK(prod.at(0, 0).is_identity());
  CHECK(prod.at(0, 1).is_zero());
  CHECK(prod.at(0, 2).is_zero());
}

TEST_CASE("kernel completion of [tau 1]") {
  OreMatrix M(1, 2);
  M.at(0, 0) = OrePoly::tau();
  M.at(0, 1) = OrePoly::identity();
  OreMatrix K(2, 1);
  K.at(0, 0) = OrePoly::identity();
  K.at(1, 0) = -OrePoly::tau();

  OreMatrix U = kernel_completion(M, K);
  CHECK(U.at(0, 1).same(K.at(0, 0)));
  CHECK(U.at(1, 1).same(K.at(1, 0)));
  OreMatrix prod = ore_mul(M, U);
  CHECK(prod.at(0, 0).is_identity());
  CHECK(prod.at(0, 1).is_zero());
  CHECK(unimodular_check(U).verified);
}

TEST_CASE("kernel completion of [1 0]") {
  OreMatrix M(1, 2);
  M.at(0, 0) = OrePoly::identity();
  OreMatrix K(2, 1);
  K.at(1, 0) = OrePoly::identity();
  CHECK(kernel_completion(M, K).same(OreMatrix::identity(2)));
}

TEST_CASE("kernel completion reproduces the paper's car certificate") {
  OreMatrix M = car_p_permuted();
  Expr A = car_expr("x'*cos(theta) + y'*sin(theta)");
  OreMatrix K(3, 2);
  K.at(0, 0) = OrePoly::monomial(Expr::constant(-1) / A, 1);
  K.at(0, 1) = OrePoly(car_expr("theta'") / A);
  K.at(1, 0) = poly("sin(theta)");
  K.at(1, 1) = poly("cos(theta)");
  K.at(2, 0) = poly("-cos(theta)");
  K.at(2, 1) = poly("sin(theta)");

  OreMatrix U = kernel_completion(M, K);
  // first column [1/A, 0, 0]
  CHECK(U.at(0, 0).same(OrePoly(simplify(Expr::constant(1) / A))));
  CHECK(U.at(1, 0).is_zero());
  CHECK(U.at(2, 0).is_zero());
  // last two columns are K itself
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(U.at(i, j + 1).same(K.at(i, j)));
}

TEST_CASE("kernel completion rejects columns outside the kernel") {
  OreMatrix M(1, 2);
  M.at(0, 0) = OrePoly::tau();
  M.at(0, 1) = OrePoly::identity();
  OreMatrix K(2, 1);
  K.at(0, 0) = OrePoly::identity();
  K.at(1, 0) = OrePoly::identity();  // M*K = tau + 1 != 0
  CHECK_THROWS_AS(kernel_completion(M, K), Error);
}

TEST_CASE("locus sweep: reduced matrix has empty locus") {
  OreMatrix M(1, 2);
  M.at(0, 0) = OrePoly::identity();
  LocusReport r = hyper_regular_locus(M);
  CHECK(r.locus.empty());
  CHECK(r.hyper_regular);
}

TEST_CASE("locus sweep: car reports the vanishing of A under every strategy") {
  LocusReport r = hyper_regular_locus(car_p());
  REQUIRE(r.locus.size() == 1);
  CHECK(r.locus[0].same(car_expr("x'*cos(theta) + y'*sin(theta)")));
  CHECK(r.hyper_regular);
  CHECK(r.outcomes.size() == 7);  // heuristic + 3! permutations
  for (const StrategyOutcome& o : r.outcomes) {
    CHECK_FALSE(o.failed);
    CHECK(o.hyper_regular);
    REQUIRE(o.locus.size() == 1);
    CHECK(equivalent_generators(o.locus[0], r.locus[0]));
  }
}

TEST_CASE("locus sweep avoids needless division: [x tau, 1]") {
  OreMatrix M(1, 2);
  M.at(0, 0) = OrePoly::monomial(Expr::var(0, 0), 1);
  M.at(0, 1) = OrePoly::identity();
  LocusReport r = hyper_regular_locus(M);
  CHECK(r.locus.empty());
  CHECK(r.hyper_regular);
}

TEST_CASE("serial and parallel locus sweeps agree") {
  LocusReport a = hyper_regular_locus(car_p(), 0, Execution::Serial);
  LocusReport b = hyper_regular_locus(car_p(), 0, Execution::Parallel);
  CHECK(a.chosen_strategy == b.chosen_strategy);
  REQUIRE(a.locus.size() == b.locus.size());
  for (std::size_t i = 0; i < a.locus.size(); ++i)
    CHECK(a.locus[i].same(b.locus[i]));
  CHECK(a.outcomes.size() == b.outcomes.size());
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    CHECK(a.outcomes[i].hyper_regular == b.outcomes[i].hyper_regular);
    REQUIRE(a.outcomes[i].locus.size() == b.outcomes[i].locus.size());
    for (std::size_t k = 0; k < a.outcomes[i].locus.size(); ++k)
      CHECK(a.outcomes[i].locus[k].same(b.outcomes[i].locus[k]));
  }
}

TEST_CASE("decomposition soundness at sampled jets") {
  ImplicitSystem car = car_system();
  OreMatrix M = car_p();
  DecompositionResult d = smith_jacobson(M);
  OreMatrix residual = ore_mul(M, d.U);
  residual.at(0, 0) = residual.at(0, 0) - OrePoly::identity();
  JetSampler sampler = explicit_model_sampler(car, 4);
  for (int j = 0; j < residual.cols(); ++j)
    for (const Expr& c : residual.at(0, j).coeffs())
      if (!c.is_zero()) CHECK(is_zero_sampled(c, sampler, 8, 1e-9));
}

TEST_CASE("ore matrix JSON round trip") {
  OreMatrix M = car_p();
  std::string text = ore_matrix_to_json(M, kCar);
  OreMatrix back = ore_matrix_from_json(text, kCar);
  CHECK(back.same(M));
  CHECK_THROWS_AS(ore_matrix_from_json("{", kCar), Error);
  CHECK_THROWS_AS(ore_matrix_from_json("{\"rows\":1}", kCar), Error);
}
