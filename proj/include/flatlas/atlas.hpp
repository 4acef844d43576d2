#ifndef FLATLAS_ATLAS_HPP
#define FLATLAS_ATLAS_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flatlas/system.hpp"

namespace flatlas {

// One flat-output chart: an open domain (all listed expressions strictly
// nonzero), the flat output psi as functions of the state jet, and the
// recovery map phi as functions of the flat-output jet (state components
// first, then the inputs).
struct Chart {
  std::string id;
  std::vector<Expr> domain;  // over state-jet coordinates
  std::vector<Expr> psi;     // m components, over state-jet coordinates
  std::vector<Expr> phi;     // n + m components, over flat-jet coordinates
};

struct InverseResult {
  std::vector<double> state;
  std::vector<double> input;
};

enum class PointStatus { Regular, CandidateIntrinsic, OutsideFiber };

struct Classification {
  PointStatus status = PointStatus::Regular;
  std::vector<std::string> chart_ids;  // charts whose domain contains the point
  std::vector<std::pair<std::string, double>> diagnostics;  // locus gen -> value
  std::string note;
};

struct CompatReport {
  std::string chart_i;
  std::string chart_j;
  int samples_used = 0;
  bool no_overlap = false;  // reported, not fatal
  double max_roundtrip_residual = 0.0;
  double max_prolongation_residual = 0.0;
  bool pass = false;
};

class Atlas {
 public:
  Atlas(std::shared_ptr<const ImplicitSystem> system, std::vector<Chart> charts);

  const ImplicitSystem& system() const { return *system_; }
  std::shared_ptr<const ImplicitSystem> system_ptr() const { return system_; }
  const std::vector<Chart>& charts() const { return charts_; }
  const Chart& chart(const std::string& id) const;
  int flat_dim() const { return system_->m(); }

  // Locus of the decomposition sweep on P(F); computed once on first use.
  const std::vector<Expr>& singular_locus() const;

 private:
  std::shared_ptr<const ImplicitSystem> system_;
  std::vector<Chart> charts_;
  mutable std::optional<std::vector<Expr>> locus_;
};

inline constexpr double kDefaultDomainEps = 1e-6;
inline constexpr double kDefaultHysteresis = 10.0;

// True iff |d(j)| > eps for every domain expression d.
bool chart_contains(const Chart& c, const JetPoint& j, double eps = kDefaultDomainEps);

// min over domain expressions of |d(j)|.
double domain_margin(const Chart& c, const JetPoint& j);

// psi and its total-derivative prolongations up to `order`, evaluated at j.
JetPoint forward(const Chart& c, const JetPoint& j, int order,
                 double eps = kDefaultDomainEps, int jet_cap = kDefaultJetCap);

// phi evaluated at a flat jet; DomainError at poles of phi.
InverseResult inverse(const Chart& c, const JetPoint& flat_jet, int n_states);

// Numeric compatibility of two charts on their sampled overlap: round trips
// through psi_j . phi_i are the identity (within tol) and the composite
// respects prolongation along solution curves (finite differences, 1e-5).
CompatReport compatibility_check(const Atlas& atlas, const Chart& ci, const Chart& cj,
                                 int samples = 64, double tol = 1e-6,
                                 std::uint64_t seed = kDefaultSeed,
                                 Execution exec = Execution::Parallel);

// Hysteresis chart selection: keep `current` while its margin exceeds eps,
// otherwise switch to the chart of maximal margin provided that margin
// exceeds hysteresis*eps (plain eps when there is no current chart).
std::string select_chart(const Atlas& a, const JetPoint& j,
                         const std::optional<std::string>& current,
                         double eps = kDefaultDomainEps,
                         double hysteresis = kDefaultHysteresis);

// Classifies a point of the zero set: outside the explicit fiber, covered by
// charts, or (when every locus generator vanishes) a candidate intrinsic
// singularity as per the hyper-regularity criterion.
Classification classify_point(const Atlas& a, const JetPoint& j,
                              double eps = kDefaultDomainEps, double tol = 1e-9);

// Batch classification; identical output for serial and parallel execution.
std::vector<Classification> classify_points(const Atlas& a,
                                            const std::vector<JetPoint>& jets,
                                            double eps = kDefaultDomainEps,
                                            double tol = 1e-9,
                                            Execution exec = Execution::Parallel);

// True iff every derivative level >= 1 vanishes (within tol).
bool is_equilibrium(const JetPoint& j, double tol = 1e-9);

// The three-chart atlas for the car (domains xdot, ydot, thetadot).
Atlas car_atlas(double length = 2.0);

// Atlas JSON: {"charts":[{"id":..., "domain":[...], "psi":[...],
// "phi":[...]}], "flat_names":[...]}; expressions in the system's names for
// domain/psi and in flat names for phi.
Atlas atlas_from_json(const std::string& text,
                      std::shared_ptr<const ImplicitSystem> system);
std::string atlas_to_json(const Atlas& atlas);
Atlas load_atlas(const std::string& name_or_path, double car_length = 2.0);

}  // namespace flatlas

#endif  // FLATLAS_ATLAS_HPP
