#include "kesten/operator.hpp"

#include "kesten/io.hpp"
#include "kesten/parallel.hpp"
#include "kesten/stats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace kesten {

void OperatorConfig::validate() const {
  if (n_mc < 1000) throw ConfigError("operator: n_mc must be at least 1000");
  if (!(power_iter_tol > 0.0)) throw ConfigError("operator: power_iter_tol must be positive");
  if (!(root_tol > 0.0)) throw ConfigError("operator: root_tol must be positive");
  if (power_iter_max < 1) throw ConfigError("operator: power_iter_max must be positive");
  if (curve_points < 3) throw ConfigError("operator: curve_points must be at least 3");
  if (mc_error_sets < 2) throw ConfigError("operator: mc_error_sets must be at least 2");
}

TransferOperator::TransferOperator(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid,
                                   const OperatorConfig& cfg, RngStream& rng)
    : spec_(&spec), grid_(std::move(grid)), cfg_(cfg) {
  spec.validate();
  cfg.validate();
  if (grid_->dim() != spec.dimension) throw Error("operator: grid and model dimensions differ");
  const int d = spec.dimension;

  if (!cfg.force_monte_carlo && spec.tabulated()) {
    closed_form_ = true;
    p_ = spec.m_weights;
    build_rows(spec.m_atoms);
  } else if (!cfg.force_monte_carlo && spec.family == Family::ScalarLognormal) {
    closed_form_ = true;
    p_ = {1.0};
    build_rows({Matrix::Identity(1, 1)});
  } else if (!cfg.force_monte_carlo && spec.family == Family::Similarity) {
    closed_form_ = true;
    p_ = {1.0};
    if (spec.rotation.kind == RotationLaw::Kind::Haar && d > 1) {
      uniform_average_ = true;
    } else {
      build_rows({spec.rotation.kind == RotationLaw::Kind::Fixed ? spec.rotation.fixed : Matrix::Identity(d, d)});
    }
  } else {
    build_monte_carlo(rng);
  }
  p_sum_ = 0.0;
  for (double p : p_) p_sum_ += p;
}

void TransferOperator::build_monte_carlo(RngStream& rng) {
  std::vector<Matrix> ms;
  ms.reserve(cfg_.n_mc);
  for (std::size_t i = 0; i < cfg_.n_mc; ++i) ms.push_back(sample_m(*spec_, rng));
  p_.assign(ms.size(), 1.0);
  build_rows(ms);
}

void TransferOperator::build_rows(const std::vector<Matrix>& ms) {
  const std::size_t n = grid_->size(), t = ms.size();
  log_norm_.assign(n * t, 0.0);
  stencil_.assign(n * t, Stencil{});
  parallel_for(n, cfg_.workers, [&](std::size_t j) {
    const RowVec& x = grid_->point(j).coords();
    for (std::size_t i = 0; i < t; ++i) {
      const RowVec y = x * ms[i];
      const double norm = y.norm();
      if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("operator: |xM| is zero or non-finite");
      log_norm_[j * t + i] = std::log(norm);
      stencil_[j * t + i] = grid_->stencil(project(y));
    }
  });
}

double TransferOperator::log_g(double varkappa) const {
  if (!closed_form_) return 0.0;
  const auto lognormal = [varkappa](double mu, double sd) { return varkappa * mu + 0.5 * varkappa * varkappa * sd * sd; };
  switch (spec_->family) {
    case Family::ScalarLognormal:
      return lognormal(spec_->log_mean, spec_->log_sd);
    case Family::Similarity:
      if (spec_->scale.kind == ScaleLaw::Kind::Deterministic) return varkappa * std::log(spec_->scale.value);
      return lognormal(spec_->scale.log_mean, spec_->scale.log_sd);
    default:
      return 0.0;
  }
}

TransferOperator::Bound TransferOperator::bind(double varkappa) const {
  if (!(varkappa >= 0.0) || !std::isfinite(varkappa)) throw Error("operator: varkappa must be finite and >= 0");
  Bound b;
  b.varkappa = varkappa;
  b.log_g = log_g(varkappa);
  b.w.resize(log_norm_.size());
  const std::size_t t = p_.size();
  for (std::size_t k = 0; k < log_norm_.size(); ++k) b.w[k] = p_[k % t] * std::exp(varkappa * log_norm_[k]);
  return b;
}

GridFunction TransferOperator::apply(const Bound& b, const GridFunction& f) const {
  if (f.size() != grid_->size()) throw Error("operator: function does not live on this grid");
  const double g = std::exp(b.log_g);
  if (uniform_average_) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      num += grid_->weight(k) * f[k];
      den += grid_->weight(k);
    }
    return GridFunction(grid_, g * (num / den));
  }
  const std::size_t n = grid_->size(), t = p_.size();
  std::vector<double> out(n);
  parallel_for(n, cfg_.workers, [&](std::size_t j) {
    double num = 0.0;
    const std::size_t row = j * t;
    for (std::size_t i = 0; i < t; ++i) num += b.w[row + i] * evaluate(stencil_[row + i], f.values);
    out[j] = g * (num / p_sum_);
  });
  return GridFunction(grid_, std::move(out));
}

GridFunction apply_T(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid, const GridFunction& f,
                     double varkappa, const OperatorConfig& cfg, RngStream& rng) {
  const TransferOperator op(spec, std::move(grid), cfg, rng);
  return op.apply(f, varkappa);
}

// --- spectral radius ---------------------------------------------------------

namespace {

void symmetrize(GridFunction& f) {
  const SphereGrid& g = *f.grid;
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = 0.5 * (f[i] + f[g.antipode(i)]);
  f.values = std::move(out);
}

}  // namespace

SpectralResult power_iteration(const TransferOperator& op, const TransferOperator::Bound& b) {
  const OperatorConfig& cfg = op.config();
  GridFunction f(op.grid(), 1.0);
  for (int k = 1; k <= cfg.power_iter_max; ++k) {
    GridFunction g = op.apply(b, f);
    symmetrize(g);
    const double s = g.sup_abs();
    if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("power iteration: iterate vanished or overflowed");
    double delta = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] /= s;
      delta = std::max(delta, std::abs(g[i] - f[i]));
    }
    f = std::move(g);
    if (delta <= cfg.power_iter_tol) return {s, std::move(f), k};
  }
  throw NumericalError("power iteration did not converge within power_iter_max sweeps "
                       "(grid too coarse or n_mc too small)");
}

SpectralResult spectral_radius(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid, double varkappa,
                               const OperatorConfig& cfg, RngStream& rng) {
  const TransferOperator op(spec, std::move(grid), cfg, rng);
  return power_iteration(op, op.bind(varkappa));
}

double fixed_point_residual(const TransferOperator& op, double varkappa, const GridFunction& r) {
  const GridFunction tr = op.apply(r, varkappa);
  double diff = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) diff = std::max(diff, std::abs(tr[i] - r[i]));
  return diff / r.sup_abs();
}

// --- root of rho = 1 ---------------------------------------------------------

namespace {

double independent_rho_sd(const TransferOperator& op, const ModelSpec& spec, double varkappa, RngStream& rng) {
  const OperatorConfig& cfg = op.config();
  std::vector<double> rhos;
  for (int s = 0; s < cfg.mc_error_sets; ++s) {
    RngStream stream = rng.split();
    const TransferOperator other(spec, op.grid(), cfg, stream);
    rhos.push_back(power_iteration(other, other.bind(varkappa)).rho);
  }
  return stats::mean_se(rhos).se * std::sqrt(static_cast<double>(rhos.size()));
}

}  // namespace

KappaSolution solve_kappa(const TransferOperator& op, RngStream& rng) {
  const OperatorConfig& cfg = op.config();
  if (!cfg.common_random_numbers && !op.closed_form())
    throw ConfigError("solve_kappa requires common random numbers");
  const ModelSpec& spec = op.spec();
  const double k0 = spec.kappa0;

  std::vector<std::pair<double, double>> curve;
  auto eval = [&](double v) { return power_iteration(op, op.bind(v)); };

  for (int k = 0; k < cfg.curve_points; ++k) {
    const double v = k0 * k / (cfg.curve_points - 1);
    curve.emplace_back(v, eval(v).rho);
  }

  double lo = -1.0, hi = -1.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    if (lo < 0.0 && curve[k].second < 1.0) lo = curve[k].first;
    else if (lo >= 0.0 && curve[k].second >= 1.0) {
      hi = curve[k].first;
      break;
    }
  }
  if (lo < 0.0) {
    // The dip below 1 may sit left of the first curve point.
    double v = curve[1].first;
    for (int m = 0; m < 30 && lo < 0.0; ++m) {
      v *= 0.5;
      const double rho = eval(v).rho;
      curve.emplace_back(v, rho);
      if (rho < 1.0) lo = v;
    }
    std::sort(curve.begin(), curve.end());
    if (lo < 0.0)
      throw BracketError("rho stays >= 1 on (0, kappa0]: no tail index (is the Lyapunov exponent negative?)", curve,
                         false);
    for (const auto& [v2, rho] : curve)
      if (v2 > lo && rho >= 1.0) {
        hi = v2;
        break;
      }
  }
  if (hi < 0.0) {
    bool noise = false;
    std::string what = "rho(kappa0) < 1: kappa0 is below the tail index";
    if (!op.closed_form()) {
      const double sd = independent_rho_sd(op, spec, k0, rng);
      noise = std::abs(curve.back().second - 1.0) < 3.0 * sd;
      if (noise) what = "rho(kappa0) < 1 but within Monte Carlo noise of 1; increase n_mc";
    }
    throw BracketError(what, curve, noise);
  }

  const double target = std::min(cfg.root_tol, cfg.power_iter_tol);
  KappaSolution sol;
  sol.closed_form = op.closed_form();
  SpectralResult at;
  double mid = 0.5 * (lo + hi);
  for (int step = 0; step < 200; ++step) {
    mid = 0.5 * (lo + hi);
    at = eval(mid);
    ++sol.bisection_steps;
    if (std::abs(at.rho - 1.0) <= target) break;
    if (at.rho < 1.0) lo = mid;
    else hi = mid;
    if (hi - lo <= 1e-13 * std::max(1.0, hi)) break;
  }

  sol.kappa = mid;
  sol.rho_at_kappa = at.rho;
  sol.r = std::move(at.eigenfunction);
  sol.iterations = at.iterations;
  sol.rho_curve = std::move(curve);

  const double h = 1e-4 * std::max(1.0, sol.kappa);
  const double up = eval(sol.kappa + h).rho;
  const double down = eval(std::max(0.0, sol.kappa - h)).rho;
  sol.log_rho_slope = (std::log(up) - std::log(down)) / (sol.kappa + h - std::max(0.0, sol.kappa - h));
  sol.fixed_point_residual = fixed_point_residual(op, sol.kappa, sol.r);
  if (!op.closed_form()) {
    const double sd = independent_rho_sd(op, spec, sol.kappa, rng);
    sol.mc_error = sd / std::abs(sol.log_rho_slope * sol.rho_at_kappa);
  }
  return sol;
}

KappaSolution solve_kappa(const ModelSpec& spec, std::shared_ptr<const SphereGrid> grid, const OperatorConfig& cfg,
                          RngStream& rng) {
  const TransferOperator op(spec, std::move(grid), cfg, rng);
  return solve_kappa(op, rng);
}

// --- products ----------------------------------------------------------------

RhoByProducts validate_rho_by_products(const ModelSpec& spec, double varkappa, int n, std::size_t n_mc,
                                       RngStream& rng) {
  if (n < 1 || n > 30) throw Error("validate_rho_by_products: n must be in 1..30");
  if (n_mc < 2) throw Error("validate_rho_by_products: need at least two products");
  const int d = spec.dimension;
  std::vector<double> logs(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    Matrix pi = Matrix::Identity(d, d);
    for (int k = 0; k < n; ++k) pi = pi * sample_m(spec, rng);
    const double norm = operator_norm(pi);
    if (!std::isfinite(norm) || !(norm > 0.0)) throw NumericalError("validate_rho_by_products: product overflow");
    logs[i] = varkappa * std::log(norm);
  }
  // Rescale by the largest term so E||Pi_n||^k stays representable.
  const double shift = *std::max_element(logs.begin(), logs.end());
  std::vector<double> terms(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) terms[i] = std::exp(logs[i] - shift);
  const auto ms = stats::mean_se(terms);
  RhoByProducts out;
  out.rho = std::exp((std::log(ms.mean) + shift) / n);
  out.std_error = out.rho * (ms.se / ms.mean) / n;
  return out;
}

void write_rho_curve_csv(std::ostream& os, const KappaSolution& sol) {
  os << "varkappa,rho\n";
  for (const auto& [v, rho] : sol.rho_curve) os << format_double(v) << ',' << format_double(rho) << '\n';
}

}  // namespace kesten
