#pragma once

#include "kesten/geometry.hpp"
#include "kesten/model.hpp"
#include "kesten/rng.hpp"
#include "kesten/shifted_chain.hpp"
#include "kesten/stats.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace kesten {

struct RSampleSet {
  std::vector<ColVec> samples;       ///< converged draws of R only
  std::vector<double> depth;         ///< number of terms per kept sample
  std::vector<double> residual;      ///< ||Pi_n|| * q_scale / |R| at stopping
  std::size_t flagged = 0;           ///< draws that hit the depth cap (excluded)
  double tol = 0.0;
  double q_scale = 0.0;

  double mean_depth() const;
};

struct RSampleConfig {
  double tol = 1e-12;
  std::size_t max_depth = 100000;
  std::optional<StoppingRule> stopping;  ///< sample the stopped model (Pi_tau, Q^tau)
  int workers = 1;
};

/// Draws of R = sum_{n>=1} Pi_{n-1} Q_n truncated once ||Pi_n|| q_scale <= tol |R|.
RSampleSet sample_R(const ModelSpec& spec, std::size_t n_samples, const RSampleConfig& cfg, RngStream& rng);

/// Scale of |Q| used by the truncation rule (largest atom norm, or |mean| + 4 sd sqrt(d)).
double q_scale(const ModelSpec& spec);

/// Largest relative change of a sample when the truncation depth is doubled on the same path.
double truncation_check(const ModelSpec& spec, std::size_t n_samples, const RSampleConfig& cfg, RngStream& rng);

/// Projections x R of every sample.
std::vector<double> project_samples(const RSampleSet& s, const RowVec& x);

struct SurvivalCurve {
  RowVec x;
  std::vector<double> t;
  std::vector<double> pos, pos_lo, pos_hi;  ///< P(xR > t)
  std::vector<double> neg, neg_lo, neg_hi;  ///< P(-xR > t)
  std::vector<double> abs, abs_lo, abs_hi;  ///< P(|xR| > t)
  std::size_t n = 0;
};

SurvivalCurve survival_curve(const std::vector<double>& projected, const RowVec& x, const std::vector<double>& t_grid);
std::vector<SurvivalCurve> survival_curves(const RSampleSet& s, const std::vector<RowVec>& directions,
                                           const std::vector<double>& t_grid);

struct HillPoint {
  double fraction = 0.0;
  std::size_t k = 0;
  double estimate = 0.0;  ///< tail index 1 / H_k
  double std_error = 0.0;
};

/// Hill estimates from the top k = fraction * n order statistics of the positive values.
std::vector<HillPoint> hill_estimate(std::vector<double> values, const std::vector<double>& k_fractions);

struct GoldieResult {
  double k0 = 0.0;
  double std_error = 0.0;
  double se_mc = 0.0;  ///< Monte Carlo layer over (R, M, Q)
  double se_pi = 0.0;  ///< propagated from the histogram errors of pi and from alpha
  std::size_t n_pairs = 0;
};

/// K0 = (1/(alpha kappa)) sum_y pi(y) (1/r(y)) mean_i [((y(M_i R_i + Q_i))+)^kappa - ((y M_i R_i)+)^kappa]
/// with fresh (M_i, Q_i) independent of the samples R_i.
GoldieResult goldie_constant(const RSampleSet& samples, const ModelSpec& spec, double kappa, const GridFunction& r,
                             const StationaryEstimate& pi, std::size_t n_pairs, RngStream& rng);

struct UnboundedCheck {
  RowVec x;
  double max_n = 0.0;
  double max_4n = 0.0;
  double top_n = 0.0;   ///< mean of the top-k projections among the first n samples
  double top_4n = 0.0;  ///< same among all 4n samples
  bool growing = false;
};

struct UnboundedReport {
  std::vector<UnboundedCheck> directions;
  bool consistent_with_unbounded = false;
};

/// Compares the first n = size/4 projections with all of them. A direction counts
/// as growing when the mean of its top-k values rises by at least `min_growth`.
UnboundedReport support_unbounded_check(const std::vector<double>& values_4n, const RowVec& x, std::size_t k = 10,
                                        double min_growth = 0.1);
UnboundedReport support_unbounded_check(const RSampleSet& s, const std::vector<RowVec>& directions, std::size_t k = 10,
                                        double min_growth = 0.1);

/// Signed coordinate directions plus `n_random` distinct random grid points.
std::vector<RowVec> default_directions(const SphereGrid& grid, std::size_t n_random, RngStream& rng);

std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct TailConfig {
  double q_lo = 0.99;      ///< calibrated range [q(q_lo), q(q_hi)] of |xR|
  double q_hi = 0.9999;
  std::optional<double> t_min;  ///< explicit range overriding the quantiles
  std::optional<double> t_max;
  std::size_t t_points = 9;
  double hill_fraction = 0.01;
  std::vector<double> k_fractions{0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1};
  double tolerance = 0.25;  ///< K-vs-level and flatness band
};

struct DirectionTail {
  RowVec x;
  double t_lo = 0.0, t_hi = 0.0;
  SurvivalCurve curve;
  std::vector<double> scaled;    ///< t^kappa P(|xR| > t) on curve.t
  double flatness = 0.0;         ///< max(scaled) / min(scaled) - 1
  double level = 0.0;            ///< median of t^kappa P(|xR| > t) / 2
  double level_lo = 0.0;         ///< same with lower Wilson bounds
  double slope_kappa = 0.0;      ///< minus the log-log survival slope of |xR|
  std::optional<double> hill_kappa;  ///< Hill on (xR)+ at the pre-registered fraction
  std::vector<HillPoint> hill;
  double symmetry_excess = 0.0;  ///< max_t |scaled_pos - scaled_neg| minus the combined Wilson half widths
  double r_x = 0.0;
  double k_x = 0.0;              ///< K0 r(x)
  double k_x_lo = 0.0;           ///< K0 r(x) lowered by 2 standard errors
};

struct TailReport {
  double kappa = 0.0;
  std::size_t n_samples = 0;
  std::size_t flagged = 0;
  double mean_depth = 0.0;
  std::vector<DirectionTail> directions;
  std::vector<HillPoint> hill_modulus;  ///< Hill on |R|
  double hill_modulus_kappa = 0.0;
  std::optional<GoldieResult> goldie;
  UnboundedReport unbounded;
};

/// Per-direction readouts on the calibrated range. K(x) is filled when `goldie` is given.
TailReport analyze_tail(const RSampleSet& samples, double kappa, const GridFunction& r,
                        const std::vector<RowVec>& directions, const std::optional<GoldieResult>& goldie,
                        const TailConfig& cfg);

/// Rows "x0..,t,pos,pos_lo,pos_hi,neg,neg_lo,neg_hi,abs,abs_lo,abs_hi".
void write_survival_csv(std::ostream& os, const TailReport& report);
/// Rows "direction,fraction,k,estimate,se" (direction -1 is |R|).
void write_hill_csv(std::ostream& os, const TailReport& report);

}  // namespace kesten
