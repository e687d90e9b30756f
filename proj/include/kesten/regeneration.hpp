#pragma once

#include "kesten/geometry.hpp"
#include "kesten/kernel.hpp"
#include "kesten/model.hpp"
#include "kesten/rng.hpp"
#include "kesten/stats.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace kesten {

/// The regeneration measure phi of a minorization P(x, .) >= p phi, x in the regeneration set.
struct PhiMeasure {
  enum class Kind { UniformBall, Atoms };
  Kind kind = Kind::UniformBall;
  RowVec center;        ///< UniformBall
  double radius = 0.0;  ///< angular radius; >= pi covers the sphere
  std::vector<RowVec> points;   ///< Atoms
  std::vector<double> weights;  ///< Atoms

  static PhiMeasure whole_sphere(int dim);
  static PhiMeasure uniform_ball(const SpherePoint& center, double radius);
  static PhiMeasure atoms(std::vector<RowVec> points, std::vector<double> weights);
  /// Atoms at the points of a grid.
  static PhiMeasure grid_measure(const SphereGrid& grid, std::vector<double> weights);

  int dim() const;
  SpherePoint sample(RngStream& rng) const;
  /// Density w.r.t. surface measure (UniformBall) or point mass (Atoms) at y.
  double value(const SpherePoint& y) const;
  bool whole() const { return kind == Kind::UniformBall && radius >= 3.141592653589793; }
};

struct MinorizationSpec {
  bool whole_sphere = true;
  RowVec set_center;      ///< regeneration set B_delta(center) when not whole_sphere
  double set_radius = 0.0;
  double p = 0.5;         ///< minorization mass, in (0, 1]
  PhiMeasure phi;
  std::size_t residual_budget = 100000;  ///< proposals per accept-reject draw

  bool in_set(const SpherePoint& x) const;
  void validate(int dim) const;
};

struct Cycle {
  std::size_t start = 0;       ///< sigma_k
  std::size_t length = 0;      ///< sigma_{k+1} - sigma_k
  double v_increment = 0.0;    ///< V_{sigma_{k+1}} - V_{sigma_k}
  double u_sigma = 0.0;        ///< U_{sigma_k} = V_{sigma_k} - V_{sigma_k - 1}
};

struct RegenTrace {
  std::vector<RowVec> x;            ///< X_0 .. X_n
  std::vector<double> v;            ///< V_0 = 0 .. V_n
  std::vector<signed char> coin;    ///< J_k for k < n: 1 heads, 0 tails, -1 outside the set
  std::vector<std::size_t> epochs;  ///< sigma_1 < sigma_2 < ...
  std::vector<Cycle> cycles;        ///< complete cycles between consecutive epochs
  std::uint64_t proposals = 0;      ///< accept-reject proposals drawn
  bool broken = false;
};

/// Athreya-Ney split chain. `broken` skips the phi / residual decomposition and
/// always moves with the kernel (negative control for the validation).
RegenTrace run_split_chain(const DirectionKernel& kernel, const MinorizationSpec& minor, const SpherePoint& x0,
                           std::size_t n_steps, RngStream& rng, bool broken = false);

struct RegenDiagnostics {
  std::size_t n_cycles = 0;
  double ks_halves = 0.0, ks_halves_critical = 0.0, ks_halves_p = 1.0;
  double lag1 = 0.0, lag1_bound = 0.0, lag1_p = 1.0;
  double ks_phi = 0.0, ks_phi_critical = 0.0, ks_phi_p = 1.0;
  double return_p_hat = 1.0;
  stats::ChiSquareResult return_fit;
  double mean_cycle = 0.0;

  bool halves_ok() const { return ks_halves < ks_halves_critical; }
  bool independence_ok() const { return std::abs(lag1) <= lag1_bound; }
  bool phi_ok() const { return ks_phi < ks_phi_critical; }
};

/// Checks of the regenerative structure at level `alpha`; needs >= 200 cycles.
RegenDiagnostics validate_regeneration(const RegenTrace& trace, const MinorizationSpec& minor, RngStream& rng,
                                       double alpha = 0.01);

/// Chi-square fit of cycle lengths to Geometric(p).
stats::ChiSquareResult cycle_length_fit(const RegenTrace& trace, double p);

struct IncrementBounds {
  double s_low = 0.0;
  double s_high = 0.0;
  std::vector<double> running_low;
  std::vector<double> running_high;
};

/// Observed extremes of U_{sigma_k}; needs >= 100 epochs.
IncrementBounds regeneration_increment_bounds(const RegenTrace& trace);

/// Occupation measure of complete cycles (renewal-reward estimate of the
/// stationary law), symmetrized under x -> -x, with ratio-estimator errors.
struct Occupation {
  std::vector<double> pi;
  std::vector<double> se;
};
Occupation cycle_occupation(const RegenTrace& trace, const SphereGrid& bins);

/// Whole-sphere Doeblin data for GaussianPerturbed: phi uniform and
/// p = safety * |S| * inf_{x,y} density, where the infimum is attained at
/// y = -(x Gamma0)~ with |x Gamma0| = largest singular value of Gamma0.
MinorizationSpec gaussian_doeblin(const ModelSpec& spec, double safety = 0.9);
/// Largest p admissible by gaussian_doeblin.
double gaussian_doeblin_mass(const ModelSpec& spec);

/// Whole-sphere Doeblin data for an atomic kernel in d = 1 from the overlap
/// min_x P(x, {y}); nullopt when the overlap is empty.
std::optional<MinorizationSpec> atomic_doeblin_1d(const DirectionKernel& kernel);

/// Rows "n,x0..,v,coin,epoch".
void write_regen_trace_csv(std::ostream& os, const RegenTrace& trace);

}  // namespace kesten
