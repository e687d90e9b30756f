#pragma once

#include "kesten/geometry.hpp"
#include "kesten/kernel.hpp"
#include "kesten/model.hpp"
#include "kesten/operator.hpp"
#include "kesten/rng.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace kesten {

/// Sampler for the kappa-shifted kernel
///   P f(x) = (1/r(x)) E |xM|^kappa f((xM)~) r((xM)~).
///
/// Exact draws are used where the tilted law is explicit (tabulated atoms,
/// lognormal scalars, similarities with constant r); otherwise one of n_prop
/// base-law candidates is resampled with weight |xM|^kappa r((xM)~).
class ShiftedStepSampler : public DirectionKernel {
 public:
  enum class Method { Auto, Resample };

  ShiftedStepSampler(const ModelSpec& spec, double kappa, GridFunction r, std::size_t n_prop = 1024,
                     Method method = Method::Auto);
  ShiftedStepSampler(ModelSpec&&, double, GridFunction, std::size_t = 1024, Method = Method::Auto) = delete;

  int dim() const override { return spec_->dimension; }
  Step step(const SpherePoint& x, RngStream& rng) const override;
  std::vector<KernelAtom> atoms(const SpherePoint& x) const override;
  std::optional<double> density(const SpherePoint& x, const SpherePoint& y) const override;

  bool exact() const noexcept { return exact_; }
  double kappa() const noexcept { return kappa_; }
  std::size_t n_prop() const noexcept { return n_prop_; }
  const GridFunction& r() const noexcept { return r_; }
  const ModelSpec& spec() const noexcept { return *spec_; }

 private:
  Step resample(const SpherePoint& x, RngStream& rng) const;

  const ModelSpec* spec_;
  double kappa_;
  GridFunction r_;
  std::size_t n_prop_;
  bool exact_ = false;
  bool r_constant_ = false;
};

struct ShiftedChainTrace {
  std::vector<RowVec> x;   ///< X_0 .. X_n
  std::vector<double> v;   ///< V_0 = 0 .. V_n
  std::vector<int> atom;   ///< atom behind step k (index k-1), -1 when not tabulated
  std::size_t burn_in = 0;
  double ess = 0.0;        ///< effective sample size of the post burn-in increments

  std::size_t steps() const { return v.empty() ? 0 : v.size() - 1; }
};

ShiftedChainTrace run_chain(const DirectionKernel& kernel, const SpherePoint& x0, std::size_t n_steps,
                            std::size_t burn_in, RngStream& rng);

/// Default burn-in: 10% of the trace, at least 1000 steps.
std::size_t default_burn_in(std::size_t n_steps);

struct StationaryEstimate {
  std::shared_ptr<const SphereGrid> bins;
  std::vector<double> pi;     ///< bin masses, sum 1
  std::vector<double> pi_se;  ///< batch-means standard errors per bin
  double alpha = 0.0;
  double alpha_se = 0.0;
  bool alpha_flagged = false;  ///< alpha <= 0: model and kappa are inconsistent
  std::size_t n_steps = 0;
  std::size_t burn_in = 0;
};

/// Runs the shifted chain from x0 and bins X_n on `bins` (the grid of r when null).
/// The histogram is symmetrized under x -> -x, which leaves the stationary law of
/// the antipodally equivariant kernel invariant.
StationaryEstimate estimate_pi_alpha(const ShiftedStepSampler& sampler, const SpherePoint& x0, std::size_t n_steps,
                                     std::optional<std::size_t> burn_in, std::shared_ptr<const SphereGrid> bins,
                                     RngStream& rng, ShiftedChainTrace* trace_out = nullptr);

StationaryEstimate stationary_from_trace(const ShiftedChainTrace& trace, std::shared_ptr<const SphereGrid> bins);

struct DriftIntegral {
  double alpha = 0.0;
  double std_error = 0.0;
};

/// sum_y pi(y) (1/r(y)) E |yM|^kappa log|yM| r((yM)~) by direct Monte Carlo per bin.
DriftIntegral drift_by_integral(const ShiftedStepSampler& sampler, const StationaryEstimate& pi, std::size_t n_mc,
                                RngStream& rng);

struct SupTailConfig {
  double zeta = 20.0;           ///< stop once log|x Pi_n| is zeta below its running max ...
  std::size_t window = 50;      ///< ... and no record was set for this many steps
  std::size_t max_steps = 1000000;
  int workers = 1;
};

struct SupTailResult {
  std::vector<double> t;
  std::vector<double> survival;  ///< P(sup_n |x Pi_n| > t)
  std::vector<double> lower;     ///< Wilson 95%
  std::vector<double> upper;
  std::vector<double> scaled;    ///< t^kappa P(sup > t)
  std::size_t n_paths = 0;
  std::size_t censored = 0;
  double flatness = 0.0;         ///< max(scaled) / min(scaled) - 1
};

/// Tail of sup_{n>=1} |x Pi_n| under the original law.
SupTailResult sup_tail(const ModelSpec& spec, double kappa, const SpherePoint& x, const std::vector<double>& t_grid,
                       std::size_t n_paths, const SupTailConfig& cfg, RngStream& rng);

/// Rows "n,x0..,v".
void write_trace_csv(std::ostream& os, const ShiftedChainTrace& trace);
/// Rows "x0..,mass,se".
void write_histogram_csv(std::ostream& os, const StationaryEstimate& est);

}  // namespace kesten
