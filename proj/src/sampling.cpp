#include "flatlas/sampling.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace flatlas {

Binding sample_uniform(const std::set<Var>& vars, Rng& rng, double lo, double hi) {
  Binding b;
  for (Var v : vars) b.set(v, rng.uniform(lo, hi));
  return b;
}

Binding sample_on_constraints(const std::vector<Expr>& constraints,
                              const std::set<Var>& extra_vars, Rng& rng) {
  std::set<Var> vars = extra_vars;
  for (const Expr& c : constraints) c.collect_vars(vars);
  std::vector<Var> order(vars.begin(), vars.end());
  const int nv = static_cast<int>(order.size());
  const int nc = static_cast<int>(constraints.size());

  // Precompute the Jacobian symbolically once.
  std::vector<std::vector<Expr>> jac(nc, std::vector<Expr>());
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < nv; ++j) jac[i].push_back(partial(constraints[i], order[j]));

  for (int attempt = 0; attempt < 32; ++attempt) {
    Binding b = sample_uniform(vars, rng);
    if (constraints.empty()) return b;
    try {
      Eigen::VectorXd x(nv);
      for (int j = 0; j < nv; ++j) x[j] = b.get(order[j]);
      bool converged = false;
      for (int it = 0; it < 60; ++it) {
        Binding cur;
        for (int j = 0; j < nv; ++j) cur.set(order[j], x[j]);
        Eigen::VectorXd r(nc);
        for (int i = 0; i < nc; ++i) r[i] = eval(constraints[i], cur);
        if (r.lpNorm<Eigen::Infinity>() < 1e-12) {
          converged = true;
          break;
        }
        Eigen::MatrixXd J(nc, nv);
        for (int i = 0; i < nc; ++i)
          for (int j = 0; j < nv; ++j) J(i, j) = eval(jac[i][j], cur);
        Eigen::MatrixXd JtJ = J.transpose() * J;
        JtJ.diagonal().array() += 1e-12;
        Eigen::VectorXd step = JtJ.ldlt().solve(J.transpose() * r);
        if (!step.allFinite()) break;
        x -= step;
      }
      if (!converged) continue;
      Binding out;
      for (int j = 0; j < nv; ++j) out.set(order[j], x[j]);
      return out;
    } catch (const Error&) {
      continue;  // pole hit while evaluating; redraw
    }
  }
  raise(ErrorKind::SamplingFailure,
        "no constraint-satisfying jet found after 32 restarts");
}

bool is_zero_sampled(const Expr& e, const JetSampler& sampler, int trials, double tol,
                    std::uint64_t seed) {
  if (trials < 1 || tol <= 0)
    raise(ErrorKind::Precondition, "is_zero_modulo requires trials >= 1, tol > 0");
  Rng rng(seed);
  int done = 0;
  int attempts = 0;
  const int max_attempts = trials * 64;
  while (done < trials) {
    if (++attempts > max_attempts)
      raise(ErrorKind::SamplingFailure,
            "could not evaluate expression away from poles");
    Binding b = sampler(rng);
    double v;
    try {
      v = eval(e, b, kPoleGuard);
    } catch (const Error& err) {
      if (err.kind() == ErrorKind::DomainError) continue;
      throw;
    }
    if (std::abs(v) >= tol) return false;
    ++done;
  }
  return true;
}

bool is_zero_modulo(const Expr& e, const std::vector<Expr>& constraints, int trials,
                    double tol, std::uint64_t seed) {
  std::set<Var> evars = e.vars();
  JetSampler sampler = [&](Rng& rng) {
    return sample_on_constraints(constraints, evars, rng);
  };
  return is_zero_sampled(e, sampler, trials, tol, seed);
}

bool equivalent_generators(const Expr& a, const Expr& b, std::uint64_t seed) {
  if (monic(a).same(monic(b))) return true;
  std::set<Var> vars = a.vars();
  b.collect_vars(vars);
  Rng rng(seed);
  double ratio = 0.0;
  bool have_ratio = false;
  int done = 0;
  int attempts = 0;
  while (done < 8 && ++attempts < 256) {
    Binding bind = sample_uniform(vars, rng);
    double va, vb;
    try {
      va = eval(a, bind, kPoleGuard);
      vb = eval(b, bind, kPoleGuard);
    } catch (const Error&) {
      continue;
    }
    if (!have_ratio) {
      if (std::abs(vb) < 1e-9) {
        if (std::abs(va) >= 1e-9) return false;
        continue;  // both vanish here; pick another point for the ratio
      }
      ratio = va / vb;
      have_ratio = true;
    }
    if (std::abs(va - ratio * vb) > 1e-6 * std::max(1.0, std::abs(va))) return false;
    ++done;
  }
  return have_ratio && done == 8;
}

}  // namespace flatlas
