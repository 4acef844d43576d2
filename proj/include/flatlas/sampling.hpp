#ifndef FLATLAS_SAMPLING_HPP
#define FLATLAS_SAMPLING_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "flatlas/expr.hpp"

namespace flatlas {

inline constexpr std::uint64_t kDefaultSeed = 20260810;
inline constexpr int kDefaultZeroTrials = 8;
inline constexpr double kDefaultZeroTol = 1e-9;
// Randomized zero tests reject samples this close to a pole.
inline constexpr double kPoleGuard = 1e-3;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Independent deterministic stream for slot `index` of a batch; parallel
  // and serial execution then see identical randomness per slot.
  static Rng for_index(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed * 0x9e3779b97f4a7c15ULL + index * 0xbf58476d1ce4e5b9ULL + 1);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  std::uint64_t next() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// Produces one random jet assignment; used to decouple the randomized zero
// test from how constraint-satisfying jets are generated (generic Newton
// projection vs. exact explicit-model prolongation).
using JetSampler = std::function<Binding(Rng&)>;

// Uniform draw on [lo, hi] for every listed coordinate.
Binding sample_uniform(const std::set<Var>& vars, Rng& rng, double lo = -2.0,
                       double hi = 2.0);

// Uniform draw followed by a damped Gauss-Newton projection onto the zero
// set of `constraints`. `extra_vars` are sampled but left free. Raises
// SamplingFailure when no converged sample is found.
Binding sample_on_constraints(const std::vector<Expr>& constraints,
                              const std::set<Var>& extra_vars, Rng& rng);

// Probabilistic zero test: true iff |e| < tol at `trials` samples drawn from
// the sampler (or from the constraint-projected sampler). Samples within the
// pole guard of a pole of e are redrawn. A `true` is a randomized verdict,
// not a proof.
bool is_zero_sampled(const Expr& e, const JetSampler& sampler,
                    int trials = kDefaultZeroTrials, double tol = kDefaultZeroTol,
                    std::uint64_t seed = kDefaultSeed);
bool is_zero_modulo(const Expr& e, const std::vector<Expr>& constraints = {},
                    int trials = kDefaultZeroTrials, double tol = kDefaultZeroTol,
                    std::uint64_t seed = kDefaultSeed);

// Zero-set equality of locus generators up to a constant factor, decided
// numerically at shared samples.
bool equivalent_generators(const Expr& a, const Expr& b,
                           std::uint64_t seed = kDefaultSeed);

}  // namespace flatlas

#endif  // FLATLAS_SAMPLING_HPP
