#pragma once

#include "kesten/error.hpp"
#include "kesten/geometry.hpp"
#include "kesten/model.hpp"
#include "kesten/rng.hpp"

#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

namespace kesten {

struct OperatorConfig {
  std::size_t n_mc = 2000;             ///< frozen M-samples for the Monte Carlo path
  bool common_random_numbers = true;   ///< false: fresh samples on every application
  double power_iter_tol = 1e-10;       ///< relative sup-norm change between sweeps
  int power_iter_max = 5000;
  double root_tol = 1e-8;              ///< tolerance on |rho(kappa) - 1|
  int curve_points = 9;                ///< evenly spaced evaluations on [0, kappa0]
  int mc_error_sets = 10;              ///< independent sample sets for the kappa error
  bool force_monte_carlo = false;      ///< bypass the closed-form paths
  int workers = 1;

  void validate() const;
};

/// The transfer operator T_k f(x) = E |xM|^k f((xM)~) discretized on a grid.
///
/// Every grid row x_j carries terms (p_i, log|x_j M_i|, stencil of (x_j M_i)~);
/// T_k f(x_j) = g(k) * sum_i p_i |x_j M_i|^k f(..) / sum_i p_i.
/// Tabulated families use the exact atoms; lognormal and similarity families
/// put the scale law into g(k); all others use a frozen Monte Carlo sample set.
class TransferOperator {
 public:
  TransferOperator(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid, const OperatorConfig& cfg,
                   RngStream& rng);
  TransferOperator(ModelSpec&&, std::shared_ptr<const SphereGrid>, const OperatorConfig&, RngStream&) = delete;

  /// Weights of T_k for one fixed k.
  struct Bound {
    double varkappa = 0.0;
    double log_g = 0.0;
    std::vector<double> w;  // row-major, grid.size() x n_terms
  };
  Bound bind(double varkappa) const;

  GridFunction apply(const Bound& b, const GridFunction& f) const;
  GridFunction apply(const GridFunction& f, double varkappa) const { return apply(bind(varkappa), f); }

  bool closed_form() const noexcept { return closed_form_; }
  const ModelSpec& spec() const noexcept { return *spec_; }
  std::size_t n_terms() const noexcept { return p_.size(); }
  const std::shared_ptr<const SphereGrid>& grid() const noexcept { return grid_; }
  const OperatorConfig& config() const noexcept { return cfg_; }

 private:
  void build_monte_carlo(RngStream& rng);
  void build_rows(const std::vector<Matrix>& ms);
  double log_g(double varkappa) const;

  const ModelSpec* spec_;
  std::shared_ptr<const SphereGrid> grid_;
  OperatorConfig cfg_;
  bool closed_form_ = false;
  bool uniform_average_ = false;  // Haar similarity: E f((xO)~) is the grid mean
  std::vector<double> p_;
  double p_sum_ = 0.0;
  std::vector<double> log_norm_;  // grid.size() x n_terms
  std::vector<Stencil> stencil_;  // grid.size() x n_terms
};

/// One application of T_k. With common random numbers off, a fresh sample set is drawn.
GridFunction apply_T(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid, const GridFunction& f,
                     double varkappa, const OperatorConfig& cfg, RngStream& rng);

struct SpectralResult {
  double rho = 0.0;
  GridFunction eigenfunction;  ///< symmetric, sup-normalized
  int iterations = 0;
};

/// Power iteration from f = 1 with antipodal symmetrization after each sweep.
/// Throws NumericalError on non-convergence.
SpectralResult power_iteration(const TransferOperator& op, const TransferOperator::Bound& b);
SpectralResult spectral_radius(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid, double varkappa,
                               const OperatorConfig& cfg, RngStream& rng);

struct KappaSolution {
  double kappa = 0.0;
  double rho_at_kappa = 0.0;
  std::vector<std::pair<double, double>> rho_curve;  ///< sorted by varkappa
  GridFunction r;
  int iterations = 0;         ///< power-iteration sweeps at the returned kappa
  int bisection_steps = 0;
  double mc_error = 0.0;      ///< standard error of kappa from independent sample sets
  double log_rho_slope = 0.0; ///< d log rho / d varkappa at kappa
  double fixed_point_residual = 0.0;  ///< sup |T_kappa r - r| / sup r
  bool closed_form = false;
};

/// Raised when rho(kappa0) < 1 or rho never drops below 1.
class BracketError : public NumericalError {
 public:
  BracketError(const std::string& what, std::vector<std::pair<double, double>> curve, bool noise_dominated)
      : NumericalError(what), curve_(std::move(curve)), noise_dominated_(noise_dominated) {}
  const std::vector<std::pair<double, double>>& curve() const noexcept { return curve_; }
  bool noise_dominated() const noexcept { return noise_dominated_; }

 private:
  std::vector<std::pair<double, double>> curve_;
  bool noise_dominated_;
};

KappaSolution solve_kappa(const TransferOperator& op, RngStream& rng);
KappaSolution solve_kappa(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid, const OperatorConfig& cfg,
                          RngStream& rng);

/// sup |T r - r| / sup r for the operator at `varkappa`.
double fixed_point_residual(const TransferOperator& op, double varkappa, const GridFunction& r);

struct RhoByProducts {
  double rho = 0.0;
  double std_error = 0.0;
};

/// (E ||Pi_n||^k)^{1/n} from n_mc dense products of length n (n <= 30).
RhoByProducts validate_rho_by_products(const ModelSpec& spec, double varkappa, int n, std::size_t n_mc,
                                       RngStream& rng);

/// "varkappa,rho" rows.
void write_rho_curve_csv(std::ostream& os, const KappaSolution& sol);

}  // namespace kesten
