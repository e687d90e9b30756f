#include "kesten/shifted_chain.hpp"

#include "kesten/error.hpp"
#include "kesten/io.hpp"
#include "kesten/parallel.hpp"
#include "kesten/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace kesten {

ShiftedStepSampler::ShiftedStepSampler(const ModelSpec& spec, double kappa, GridFunction r, std::size_t n_prop,
                                       Method method)
    : spec_(&spec), kappa_(kappa), r_(std::move(r)), n_prop_(n_prop) {
  spec.validate();
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw Error("shifted sampler: kappa must be positive");
  if (n_prop < 100) throw Error("shifted sampler: n_prop must be at least 100");
  if (!r_.grid || r_.grid->dim() != spec.dimension) throw Error("shifted sampler: r lives on a grid of wrong dimension");
  if (!(r_.min() > 0.0)) throw Error("shifted sampler: r must be positive");
  r_constant_ = r_.min() == r_.max();
  if (method == Method::Auto) {
    exact_ = spec.tabulated() || spec.family == Family::ScalarLognormal ||
             (spec.family == Family::Similarity && r_constant_);
  }
}

std::vector<KernelAtom> ShiftedStepSampler::atoms(const SpherePoint& x) const {
  std::vector<KernelAtom> out;
  if (!spec_->tabulated()) return out;
  double total = 0.0;
  for (std::size_t k = 0; k < spec_->m_atoms.size(); ++k) {
    const RowVec y = x.coords() * spec_->m_atoms[k];
    KernelAtom a{project(y), std::log(y.norm()), 0.0, static_cast<int>(k)};
    a.prob = spec_->m_weights[k] * std::exp(kappa_ * a.u) * interpolate(r_, a.y);
    total += a.prob;
    out.push_back(a);
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("shifted sampler: tilted weights degenerate");
  for (auto& a : out) a.prob /= total;
  return out;
}

std::optional<double> ShiftedStepSampler::density(const SpherePoint& /*x*/, const SpherePoint& /*y*/) const {
  if (exact_ && spec_->family == Family::Similarity && spec_->rotation.kind == RotationLaw::Kind::Haar &&
      spec_->dimension > 1)
    return 1.0 / sphere_area(spec_->dimension);
  return std::nullopt;
}

Step ShiftedStepSampler::step(const SpherePoint& x, RngStream& rng) const {
  if (!exact_) return resample(x, rng);
  switch (spec_->family) {
    case Family::ScalarLognormal: {
      // Exponential tilt of N(mu, s^2) by e^{kappa u} is N(mu + kappa s^2, s^2).
      const double s = spec_->log_sd;
      return {x, spec_->log_mean + kappa_ * s * s + s * rng.normal(), -1};
    }
    case Family::Similarity: {
      double u = 0.0;
      if (spec_->scale.kind == ScaleLaw::Kind::Deterministic) {
        u = std::log(spec_->scale.value);
      } else {
        const double s = spec_->scale.log_sd;
        u = spec_->scale.log_mean + kappa_ * s * s + s * rng.normal();
      }
      const Matrix o = spec_->rotation.kind == RotationLaw::Kind::Fixed ? spec_->rotation.fixed
                                                                         : haar_rotation(spec_->dimension, rng);
      return {project(x.coords() * o), u, -1};
    }
    default: {
      const auto law = atoms(x);
      double c = rng.uniform();
      for (const auto& a : law) {
        if (c < a.prob) return {a.y, a.u, a.atom};
        c -= a.prob;
      }
      const auto& a = law.back();
      return {a.y, a.u, a.atom};
    }
  }
}

Step ShiftedStepSampler::resample(const SpherePoint& x, RngStream& rng) const {
  std::vector<RowVec> ys(n_prop_);
  std::vector<double> us(n_prop_), lw(n_prop_);
  std::vector<int> atoms(n_prop_);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_prop_; ++i) {
    const Matrix m = sample_m(*spec_, rng, nullptr, &atoms[i]);
    ys[i] = x.coords() * m;
    const double n = ys[i].norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("shifted sampler: |xM| is zero or non-finite");
    us[i] = std::log(n);
    lw[i] = kappa_ * us[i] + std::log(interpolate(r_, project(ys[i])));
    top = std::max(top, lw[i]);
  }
  double total = 0.0;
  for (double& w : lw) {
    w = std::exp(w - top);
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("shifted sampler: all resampling weights vanish");
  double c = rng.uniform() * total;
  std::size_t pick = n_prop_ - 1;
  for (std::size_t i = 0; i < n_prop_; ++i) {
    if (c < lw[i]) {
      pick = i;
      break;
    }
    c -= lw[i];
  }
  return {project(ys[pick]), us[pick], atoms[pick]};
}

// --- traces --------------------------------------------------------------------

std::size_t default_burn_in(std::size_t n_steps) { return std::max<std::size_t>(1000, n_steps / 10); }

ShiftedChainTrace run_chain(const DirectionKernel& kernel, const SpherePoint& x0, std::size_t n_steps,
                            std::size_t burn_in, RngStream& rng) {
  if (x0.dim() != kernel.dim()) throw Error("run_chain: start point has wrong dimension");
  if (burn_in >= n_steps) throw Error("run_chain: burn-in must be shorter than the trace");
  ShiftedChainTrace t;
  t.burn_in = burn_in;
  t.x.reserve(n_steps + 1);
  t.v.reserve(n_steps + 1);
  t.atom.reserve(n_steps);
  t.x.push_back(x0.coords());
  t.v.push_back(0.0);
  SpherePoint x = x0;
  for (std::size_t n = 0; n < n_steps; ++n) {
    const Step s = kernel.step(x, rng);
    x = s.x;
    t.x.push_back(x.coords());
    t.v.push_back(t.v.back() + s.u);
    t.atom.push_back(s.atom);
  }
  std::vector<double> inc(t.v.size() - 1 - burn_in);
  for (std::size_t k = 0; k < inc.size(); ++k) inc[k] = t.v[burn_in + k + 1] - t.v[burn_in + k];
  const double rho1 = stats::lag1_autocorrelation(inc);
  const double ratio = std::isfinite(rho1) ? (1.0 - rho1) / (1.0 + rho1) : 1.0;
  t.ess = static_cast<double>(inc.size()) * std::max(ratio, 0.0);
  return t;
}

StationaryEstimate stationary_from_trace(const ShiftedChainTrace& trace, std::shared_ptr<const SphereGrid> bins) {
  const std::size_t n = trace.steps();
  const std::size_t burn = trace.burn_in;
  const std::size_t m = n - burn;
  if (m < 100) throw Error("stationary estimate: too few post burn-in steps");
  StationaryEstimate est;
  est.bins = bins;
  est.n_steps = n;
  est.burn_in = burn;

  const std::size_t nb = bins->size();
  constexpr std::size_t kBatches = 50;
  const std::size_t batch = m / kBatches;
  std::vector<double> counts(nb, 0.0);
  std::vector<double> batch_counts(kBatches * nb, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t b = bins->bin(SpherePoint::from_unit(trace.x[burn + 1 + k]));
    counts[b] += 1.0;
    if (k < batch * kBatches) batch_counts[(k / batch) * nb + b] += 1.0;
  }
  est.pi.resize(nb);
  est.pi_se.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t a = bins->antipode(i);
    est.pi[i] = 0.5 * (counts[i] + counts[a]) / static_cast<double>(m);
    std::vector<double> means(kBatches);
    for (std::size_t b = 0; b < kBatches; ++b)
      means[b] = 0.5 * (batch_counts[b * nb + i] + batch_counts[b * nb + a]) / static_cast<double>(batch);
    est.pi_se[i] = stats::mean_se(means).se;
  }

  std::vector<double> inc(m);
  for (std::size_t k = 0; k < m; ++k) inc[k] = trace.v[burn + k + 1] - trace.v[burn + k];
  est.alpha = (trace.v[n] - trace.v[burn]) / static_cast<double>(m);
  est.alpha_se = stats::batch_means(inc).se;
  est.alpha_flagged = !(est.alpha > 0.0);
  return est;
}

StationaryEstimate estimate_pi_alpha(const ShiftedStepSampler& sampler, const SpherePoint& x0, std::size_t n_steps,
                                     std::optional<std::size_t> burn_in, std::shared_ptr<const SphereGrid> bins,
                                     RngStream& rng, ShiftedChainTrace* trace_out) {
  const std::size_t burn = burn_in.value_or(default_burn_in(n_steps));
  if (n_steps < burn + 10000) throw Error("estimate_pi_alpha: need at least 1e4 steps after burn-in");
  if (!bins) bins = sampler.r().grid;
  ShiftedChainTrace trace = run_chain(sampler, x0, n_steps, burn, rng);
  StationaryEstimate est = stationary_from_trace(trace, bins);
  if (trace_out) *trace_out = std::move(trace);
  return est;
}

DriftIntegral drift_by_integral(const ShiftedStepSampler& sampler, const StationaryEstimate& pi, std::size_t n_mc,
                                RngStream& rng) {
  if (n_mc < 2) throw Error("drift_by_integral: need at least two samples per bin");
  const ModelSpec& spec = sampler.spec();
  const double kappa = sampler.kappa();
  DriftIntegral out;
  double var = 0.0;
  for (std::size_t i = 0; i < pi.pi.size(); ++i) {
    if (pi.pi[i] <= 0.0) continue;
    const SpherePoint& y = pi.bins->point(i);
    const double ry = interpolate(sampler.r(), y);
    std::vector<double> terms(n_mc);
    for (std::size_t k = 0; k < n_mc; ++k) {
      const RowVec z = y.coords() * sample_m(spec, rng);
      const double l = std::log(z.norm());
      terms[k] = std::exp(kappa * l) * l * interpolate(sampler.r(), project(z)) / ry;
    }
    const auto ms = stats::mean_se(terms);
    out.alpha += pi.pi[i] * ms.mean;
    var += pi.pi[i] * pi.pi[i] * ms.se * ms.se;
  }
  out.std_error = std::sqrt(var);
  return out;
}

// --- sup tail ------------------------------------------------------------------

SupTailResult sup_tail(const ModelSpec& spec, double kappa, const SpherePoint& x, const std::vector<double>& t_grid,
                       std::size_t n_paths, const SupTailConfig& cfg, RngStream& rng) {
  if (t_grid.empty()) throw Error("sup_tail: empty t grid");
  for (std::size_t k = 0; k < t_grid.size(); ++k)
    if (!(t_grid[k] > 0.0) || (k > 0 && !(t_grid[k] > t_grid[k - 1])))
      throw Error("sup_tail: t grid must be positive and increasing");
  if (n_paths == 0) throw Error("sup_tail: need at least one path");
  if (!(cfg.zeta > 0.0)) throw Error("sup_tail: zeta must be positive");

  constexpr std::size_t kBlock = 256;
  const std::size_t n_blocks = (n_paths + kBlock - 1) / kBlock;
  const std::uint64_t base = rng.next_u64();
  std::vector<double> log_sup(n_paths);
  std::vector<char> censored(n_paths, 0);
  parallel_for(n_blocks, cfg.workers, [&](std::size_t b) {
    RngStream stream(base, b);
    for (std::size_t p = b * kBlock; p < std::min(n_paths, (b + 1) * kBlock); ++p) {
      ProductAccumulator acc(x);
      double best = -std::numeric_limits<double>::infinity();
      std::size_t since = 0;
      while (true) {
        acc.advance_inplace(sample_m(spec, stream));
        if (acc.log_norm > best) {
          best = acc.log_norm;
          since = 0;
        } else {
          ++since;
        }
        if (acc.log_norm <= best - cfg.zeta && since >= cfg.window) break;
        if (acc.steps >= cfg.max_steps) {
          censored[p] = 1;
          break;
        }
      }
      log_sup[p] = best;
    }
  });

  SupTailResult out;
  out.n_paths = n_paths;
  for (char c : censored) out.censored += static_cast<std::size_t>(c);
  std::sort(log_sup.begin(), log_sup.end());
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double t : t_grid) {
    const double lt = std::log(t);
    const auto above = static_cast<std::size_t>(log_sup.end() - std::upper_bound(log_sup.begin(), log_sup.end(), lt));
    const double p = static_cast<double>(above) / static_cast<double>(n_paths);
    const auto w = stats::wilson(above, n_paths);
    out.t.push_back(t);
    out.survival.push_back(p);
    out.lower.push_back(w.lo);
    out.upper.push_back(w.hi);
    out.scaled.push_back(std::pow(t, kappa) * p);
    lo = std::min(lo, out.scaled.back());
    hi = std::max(hi, out.scaled.back());
  }
  out.flatness = lo > 0.0 ? hi / lo - 1.0 : std::numeric_limits<double>::infinity();
  return out;
}

// --- export --------------------------------------------------------------------

void write_trace_csv(std::ostream& os, const ShiftedChainTrace& trace) {
  const auto d = trace.x.empty() ? 0 : trace.x.front().size();
  os << "n";
  for (Eigen::Index i = 0; i < d; ++i) os << ",x" << i;
  os << ",v\n";
  for (std::size_t n = 0; n < trace.v.size(); ++n) {
    os << n;
    for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_double(trace.x[n](i));
    os << ',' << format_double(trace.v[n]) << '\n';
  }
}

void write_histogram_csv(std::ostream& os, const StationaryEstimate& est) {
  const int d = est.bins->dim();
  for (int i = 0; i < d; ++i) os << 'x' << i << ',';
  os << "mass,se\n";
  for (std::size_t k = 0; k < est.pi.size(); ++k) {
    const auto& p = est.bins->point(k);
    for (int i = 0; i < d; ++i) os << format_double(p[i]) << ',';
    os << format_double(est.pi[k]) << ',' << format_double(est.pi_se[k]) << '\n';
  }
}

}  // namespace kesten
