#include "kesten/tail.hpp"

#include "kesten/error.hpp"
#include "kesten/io.hpp"
#include "kesten/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace kesten {

double RSampleSet::mean_depth() const {
  if (depth.empty()) return 0.0;
  return std::accumulate(depth.begin(), depth.end(), 0.0) / static_cast<double>(depth.size());
}

double q_scale(const ModelSpec& spec) {
  const QLaw& q = spec.q;
  if (q.kind == QLaw::Kind::Gaussian) return q.mean.norm() + 4.0 * q.sd * std::sqrt(static_cast<double>(spec.dimension));
  double s = 0.0;
  for (std::size_t k = 0; k < q.atoms.size(); ++k)
    if (q.kind == QLaw::Kind::Indexed || q.weights[k] > 0.0) s = std::max(s, q.atoms[k].norm());
  return s;
}

namespace {

// The truncation rule is applied with this extra margin so that continuing a
// path further leaves the sample unchanged to within tol even when the
// remaining tail sum happens to be large.
constexpr double kMargin = 1e-6;
constexpr std::size_t kBlock = 4096;

double effective_q_scale(const ModelSpec& spec, const RSampleConfig& cfg) {
  double s = q_scale(spec);
  if (cfg.stopping) {
    s *= cfg.stopping->kind == StoppingRule::Kind::Geometric ? 1.0 / cfg.stopping->p
                                                             : static_cast<double>(cfg.stopping->n);
  }
  return s;
}

struct PathState {
  Matrix pi;
  ColVec r;
  std::size_t depth = 0;
};

// Advances until the truncation rule holds. Returns false on the depth cap or overflow.
bool run_until_converged(const PairSource& source, double qs, double tol, std::size_t max_depth, PathState& st,
                         RngStream& rng) {
  while (st.depth < max_depth) {
    const PairSample p = source.draw(rng);
    st.r += st.pi * p.q;
    st.pi = st.pi * p.m;
    ++st.depth;
    const double norm = st.pi.norm();
    if (!std::isfinite(norm) || !st.r.allFinite()) return false;
    const double scale = st.r.norm() > 0.0 ? st.r.norm() : qs;
    if (norm * qs <= kMargin * tol * scale) return true;
  }
  return false;
}

}  // namespace

RSampleSet sample_R(const ModelSpec& spec, std::size_t n_samples, const RSampleConfig& cfg, RngStream& rng) {
  spec.validate();
  if (!(cfg.tol > 0.0)) throw Error("sample_R: tol must be positive");
  const PairSource source{&spec, cfg.stopping};
  const double qs = effective_q_scale(spec, cfg);
  const int d = spec.dimension;
  const std::size_t n_blocks = (n_samples + kBlock - 1) / kBlock;
  const std::uint64_t base = rng.next_u64();

  struct Block {
    std::vector<ColVec> samples;
    std::vector<double> depth, residual;
    std::size_t flagged = 0;
  };
  std::vector<Block> blocks(n_blocks);
  parallel_for(n_blocks, cfg.workers, [&](std::size_t b) {
    RngStream stream(base, b);
    Block& out = blocks[b];
    const std::size_t count = std::min(kBlock, n_samples - b * kBlock);
    for (std::size_t i = 0; i < count; ++i) {
      PathState st{Matrix::Identity(d, d), ColVec::Zero(d), 0};
      if (!run_until_converged(source, qs, cfg.tol, cfg.max_depth, st, stream)) {
        ++out.flagged;
        continue;
      }
      out.samples.push_back(st.r);
      out.depth.push_back(static_cast<double>(st.depth));
      const double rn = st.r.norm();
      out.residual.push_back(rn > 0.0 ? st.pi.norm() * qs / rn : 0.0);
    }
  });

  RSampleSet set;
  set.tol = cfg.tol;
  set.q_scale = qs;
  set.samples.reserve(n_samples);
  for (auto& b : blocks) {
    set.samples.insert(set.samples.end(), b.samples.begin(), b.samples.end());
    set.depth.insert(set.depth.end(), b.depth.begin(), b.depth.end());
    set.residual.insert(set.residual.end(), b.residual.begin(), b.residual.end());
    set.flagged += b.flagged;
  }
  return set;
}

double truncation_check(const ModelSpec& spec, std::size_t n_samples, const RSampleConfig& cfg, RngStream& rng) {
  const PairSource source{&spec, cfg.stopping};
  const double qs = effective_q_scale(spec, cfg);
  const int d = spec.dimension;
  double worst = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    PathState st{Matrix::Identity(d, d), ColVec::Zero(d), 0};
    if (!run_until_converged(source, qs, cfg.tol, cfg.max_depth, st, rng)) continue;
    const ColVec first = st.r;
    const std::size_t target = 2 * st.depth;
    while (st.depth < target) {
      const PairSample p = source.draw(rng);
      st.r += st.pi * p.q;
      st.pi = st.pi * p.m;
      ++st.depth;
    }
    const double scale = st.r.norm();
    if (scale > 0.0) worst = std::max(worst, (st.r - first).norm() / scale);
  }
  return worst;
}

std::vector<double> project_samples(const RSampleSet& s, const RowVec& x) {
  std::vector<double> out(s.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.dot(s.samples[i].transpose());
  return out;
}

// --- survival ------------------------------------------------------------------

SurvivalCurve survival_curve(const std::vector<double>& projected, const RowVec& x, const std::vector<double>& t_grid) {
  if (projected.empty()) throw Error("survival_curve: no samples");
  std::vector<double> v = projected;
  std::sort(v.begin(), v.end());
  SurvivalCurve c;
  c.x = x;
  c.n = v.size();
  for (double t : t_grid) {
    const auto pos = static_cast<std::size_t>(v.end() - std::upper_bound(v.begin(), v.end(), t));
    const auto neg = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), -t) - v.begin());
    const std::size_t both = t >= 0.0 ? pos + neg : v.size();
    const double n = static_cast<double>(v.size());
    auto push = [&](std::size_t count, std::vector<double>& p, std::vector<double>& lo, std::vector<double>& hi) {
      const auto w = stats::wilson(count, v.size());
      p.push_back(static_cast<double>(count) / n);
      lo.push_back(w.lo);
      hi.push_back(w.hi);
    };
    c.t.push_back(t);
    push(pos, c.pos, c.pos_lo, c.pos_hi);
    push(neg, c.neg, c.neg_lo, c.neg_hi);
    push(both, c.abs, c.abs_lo, c.abs_hi);
  }
  return c;
}

std::vector<SurvivalCurve> survival_curves(const RSampleSet& s, const std::vector<RowVec>& directions,
                                           const std::vector<double>& t_grid) {
  std::vector<SurvivalCurve> out;
  for (const auto& x : directions) out.push_back(survival_curve(project_samples(s, x), x, t_grid));
  return out;
}

// --- Hill ------------------------------------------------------------------------

std::vector<HillPoint> hill_estimate(std::vector<double> values, const std::vector<double>& k_fractions) {
  const std::size_t n = values.size();
  std::vector<double> pos;
  for (double v : values)
    if (v > 0.0) pos.push_back(v);
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::vector<HillPoint> out;
  for (double f : k_fractions) {
    const auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(n)));
    if (k < 1) throw Error("hill_estimate: fraction too small for the sample size");
    if (k + 1 > pos.size()) throw Error("hill_estimate: fewer positive values than k + 1");
    double h = 0.0;
    for (std::size_t i = 0; i < k; ++i) h += std::log(pos[i]);
    h = h / static_cast<double>(k) - std::log(pos[k]);
    HillPoint p;
    p.fraction = f;
    p.k = k;
    p.estimate = 1.0 / h;
    p.std_error = p.estimate / std::sqrt(static_cast<double>(k));
    out.push_back(p);
  }
  return out;
}

// --- Goldie constant -------------------------------------------------------------

GoldieResult goldie_constant(const RSampleSet& samples, const ModelSpec& spec, double kappa, const GridFunction& r,
                             const StationaryEstimate& pi, std::size_t n_pairs, RngStream& rng) {
  if (samples.samples.empty()) throw Error("goldie_constant: no R samples");
  if (n_pairs < 2 || n_pairs > samples.samples.size())
    throw Error("goldie_constant: n_pairs must lie in [2, number of samples]");
  if (!(pi.alpha > 0.0)) throw NumericalError("goldie_constant: drift alpha must be positive");

  std::vector<std::size_t> live;
  std::vector<RowVec> ys;
  std::vector<double> coef;  // pi(y) / r(y)
  for (std::size_t b = 0; b < pi.pi.size(); ++b) {
    if (pi.pi[b] <= 0.0) continue;
    const SpherePoint& y = pi.bins->point(b);
    live.push_back(b);
    ys.push_back(y.coords());
    coef.push_back(pi.pi[b] / interpolate(r, y));
  }

  auto pos_pow = [kappa](double v) { return v > 0.0 ? std::pow(v, kappa) : 0.0; };
  std::vector<double> g(n_pairs);
  std::vector<double> per_bin(live.size(), 0.0);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const PairSample p = sample_pair(spec, rng);
    const ColVec a = p.m * samples.samples[i];
    const ColVec b = a + p.q;
    double gi = 0.0;
    for (std::size_t j = 0; j < live.size(); ++j) {
      const double term = pos_pow(ys[j].dot(b.transpose())) - pos_pow(ys[j].dot(a.transpose()));
      per_bin[j] += term;
      gi += coef[j] * term;
    }
    g[i] = gi;
  }

  const double denom = pi.alpha * kappa;
  const auto ms = stats::mean_se(g);
  GoldieResult out;
  out.n_pairs = n_pairs;
  out.k0 = ms.mean / denom;
  out.se_mc = ms.se / denom;
  double var_pi = 0.0;
  for (std::size_t j = 0; j < live.size(); ++j) {
    const double mean_term = per_bin[j] / static_cast<double>(n_pairs);
    const double dk = mean_term / interpolate(r, pi.bins->point(live[j])) / denom;
    var_pi += dk * dk * pi.pi_se[live[j]] * pi.pi_se[live[j]];
  }
  const double rel_alpha = pi.alpha_se / pi.alpha;
  var_pi += out.k0 * out.k0 * rel_alpha * rel_alpha;
  out.se_pi = std::sqrt(var_pi);
  out.std_error = std::sqrt(out.se_mc * out.se_mc + var_pi);
  return out;
}

// --- support -----------------------------------------------------------------------

UnboundedReport support_unbounded_check(const std::vector<double>& values_4n, const RowVec& x, std::size_t k,
                                        double min_growth) {
  const std::size_t n = values_4n.size() / 4;
  if (n < k || k == 0) throw Error("support_unbounded_check: too few samples for the top-k statistic");
  auto top_mean = [k](std::vector<double> v) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
    return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
  };
  UnboundedCheck c;
  c.x = x;
  const std::vector<double> first(values_4n.begin(), values_4n.begin() + static_cast<std::ptrdiff_t>(n));
  c.max_n = *std::max_element(first.begin(), first.end());
  c.max_4n = *std::max_element(values_4n.begin(), values_4n.end());
  c.top_n = top_mean(first);
  c.top_4n = top_mean(values_4n);
  c.growing = c.top_n > 0.0 && c.top_4n >= (1.0 + min_growth) * c.top_n;
  UnboundedReport rep;
  rep.directions.push_back(c);
  rep.consistent_with_unbounded = c.growing;
  return rep;
}

UnboundedReport support_unbounded_check(const RSampleSet& s, const std::vector<RowVec>& directions, std::size_t k,
                                        double min_growth) {
  UnboundedReport rep;
  rep.consistent_with_unbounded = !directions.empty();
  for (const auto& x : directions) {
    const auto one = support_unbounded_check(project_samples(s, x), x, k, min_growth);
    rep.directions.push_back(one.directions.front());
    rep.consistent_with_unbounded = rep.consistent_with_unbounded && one.consistent_with_unbounded;
  }
  return rep;
}

// --- report ----------------------------------------------------------------------

std::vector<RowVec> default_directions(const SphereGrid& grid, std::size_t n_random, RngStream& rng) {
  const int d = grid.dim();
  std::vector<RowVec> out;
  for (int i = 0; i < d; ++i) {
    RowVec e = RowVec::Zero(d);
    e(i) = 1.0;
    out.push_back(e);
    out.push_back(-e);
  }
  if (d == 1) return out;
  std::size_t added = 0;
  for (std::size_t attempt = 0; added < n_random && attempt < 100 * (n_random + 1); ++attempt) {
    const RowVec& c = grid.point(rng.index(grid.size())).coords();
    const bool dup = std::any_of(out.begin(), out.end(), [&](const RowVec& o) { return (o - c).norm() < 1e-9; });
    if (dup) continue;
    out.push_back(c);
    ++added;
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw Error("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i)
    t[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) / static_cast<double>(n - 1));
  return t;
}

TailReport analyze_tail(const RSampleSet& samples, double kappa, const GridFunction& r,
                        const std::vector<RowVec>& directions, const std::optional<GoldieResult>& goldie,
                        const TailConfig& cfg) {
  TailReport rep;
  rep.kappa = kappa;
  rep.n_samples = samples.samples.size();
  rep.flagged = samples.flagged;
  rep.mean_depth = samples.mean_depth();
  rep.goldie = goldie;

  for (const auto& x : directions) {
    DirectionTail dt;
    dt.x = x;
    const std::vector<double> proj = project_samples(samples, x);
    std::vector<double> mag(proj.size());
    for (std::size_t i = 0; i < proj.size(); ++i) mag[i] = std::abs(proj[i]);
    std::sort(mag.begin(), mag.end());
    dt.t_lo = cfg.t_min ? *cfg.t_min : stats::quantile_sorted(mag, cfg.q_lo);
    dt.t_hi = cfg.t_max ? *cfg.t_max : stats::quantile_sorted(mag, cfg.q_hi);
    if (!(dt.t_lo > 0.0) || !(dt.t_hi > dt.t_lo)) throw NumericalError("analyze_tail: degenerate calibrated range");
    dt.curve = survival_curve(proj, x, log_grid(dt.t_lo, dt.t_hi, cfg.t_points));

    std::vector<double> lt, lp, scaled_lo;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < dt.curve.t.size(); ++i) {
      const double tk = std::pow(dt.curve.t[i], kappa);
      dt.scaled.push_back(tk * dt.curve.abs[i]);
      scaled_lo.push_back(tk * dt.curve.abs_lo[i]);
      lo = std::min(lo, dt.scaled.back());
      hi = std::max(hi, dt.scaled.back());
      if (dt.curve.abs[i] > 0.0) {
        lt.push_back(std::log(dt.curve.t[i]));
        lp.push_back(std::log(dt.curve.abs[i]));
      }
      const double half_pos = 0.5 * (dt.curve.pos_hi[i] - dt.curve.pos_lo[i]);
      const double half_neg = 0.5 * (dt.curve.neg_hi[i] - dt.curve.neg_lo[i]);
      const double excess = tk * (std::abs(dt.curve.pos[i] - dt.curve.neg[i]) - half_pos - half_neg);
      dt.symmetry_excess = i == 0 ? excess : std::max(dt.symmetry_excess, excess);
    }
    dt.flatness = lo > 0.0 ? hi / lo - 1.0 : std::numeric_limits<double>::infinity();
    dt.level = 0.5 * stats::median(dt.scaled);
    dt.level_lo = 0.5 * stats::median(scaled_lo);
    dt.slope_kappa = lt.size() >= 2 ? -stats::linear_fit(lt, lp).first : 0.0;

    try {
      dt.hill = hill_estimate(proj, cfg.k_fractions);
      const auto at = hill_estimate(proj, {cfg.hill_fraction});
      dt.hill_kappa = at.front().estimate;
    } catch (const Error&) {
      dt.hill.clear();  // too few positive projections in this direction
    }

    dt.r_x = interpolate(r, project(x));
    if (goldie) {
      dt.k_x = goldie->k0 * dt.r_x;
      dt.k_x_lo = (goldie->k0 - 2.0 * goldie->std_error) * dt.r_x;
    }
    rep.directions.push_back(std::move(dt));
  }

  std::vector<double> norms(samples.samples.size());
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i] = samples.samples[i].norm();
  rep.hill_modulus = hill_estimate(norms, cfg.k_fractions);
  rep.hill_modulus_kappa = hill_estimate(norms, {cfg.hill_fraction}).front().estimate;
  rep.unbounded = support_unbounded_check(samples, directions);
  return rep;
}

void write_survival_csv(std::ostream& os, const TailReport& report) {
  if (report.directions.empty()) return;
  const auto d = report.directions.front().x.size();
  for (Eigen::Index i = 0; i < d; ++i) os << 'x' << i << ',';
  os << "t,pos,pos_lo,pos_hi,neg,neg_lo,neg_hi,abs,abs_lo,abs_hi\n";
  for (const auto& dt : report.directions) {
    const auto& c = dt.curve;
    for (std::size_t k = 0; k < c.t.size(); ++k) {
      for (Eigen::Index i = 0; i < d; ++i) os << format_double(dt.x(i)) << ',';
      os << format_double(c.t[k]);
      for (double v : {c.pos[k], c.pos_lo[k], c.pos_hi[k], c.neg[k], c.neg_lo[k], c.neg_hi[k], c.abs[k], c.abs_lo[k],
                       c.abs_hi[k]})
        os << ',' << format_double(v);
      os << '\n';
    }
  }
}

void write_hill_csv(std::ostream& os, const TailReport& report) {
  os << "direction,fraction,k,estimate,se\n";
  auto rows = [&os](long long dir, const std::vector<HillPoint>& pts) {
    for (const auto& p : pts)
      os << dir << ',' << format_double(p.fraction) << ',' << p.k << ',' << format_double(p.estimate) << ','
         << format_double(p.std_error) << '\n';
  };
  rows(-1, report.hill_modulus);
  for (std::size_t i = 0; i < report.directions.size(); ++i)
    rows(static_cast<long long>(i), report.directions[i].hill);
}

}  // namespace kesten
