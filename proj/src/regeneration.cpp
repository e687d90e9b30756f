#include "kesten/regeneration.hpp"

#include "kesten/error.hpp"
#include "kesten/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace kesten {

namespace {

constexpr double kSame = 1e-9;  // angular distance under which two directions coincide

RowVec unit(int dim, int axis) {
  RowVec e = RowVec::Zero(dim);
  e(axis) = 1.0;
  return e;
}

double ball_area(int dim, double radius) {
  if (radius >= std::numbers::pi) return sphere_area(dim);
  switch (dim) {
    case 1: return 1.0;
    case 2: return 2.0 * radius;
    default: return 2.0 * std::numbers::pi * (1.0 - std::cos(radius));
  }
}

}  // namespace

// --- phi -----------------------------------------------------------------------

PhiMeasure PhiMeasure::whole_sphere(int dim) {
  PhiMeasure m;
  m.kind = Kind::UniformBall;
  m.center = unit(dim, 0);
  m.radius = std::numbers::pi;
  return m;
}

PhiMeasure PhiMeasure::uniform_ball(const SpherePoint& center, double radius) {
  if (!(radius > 0.0)) throw ConfigError("phi: ball radius must be positive");
  PhiMeasure m;
  m.kind = Kind::UniformBall;
  m.center = center.coords();
  m.radius = std::min(radius, std::numbers::pi);
  return m;
}

PhiMeasure PhiMeasure::atoms(std::vector<RowVec> points, std::vector<double> weights) {
  if (points.empty() || points.size() != weights.size()) throw ConfigError("phi: atoms and weights differ in length");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("phi: weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("phi: weights must sum to 1");
  PhiMeasure m;
  m.kind = Kind::Atoms;
  for (auto& p : points) p = project(p).coords();
  m.points = std::move(points);
  m.weights = std::move(weights);
  return m;
}

PhiMeasure PhiMeasure::grid_measure(const SphereGrid& grid, std::vector<double> weights) {
  std::vector<RowVec> pts;
  for (const auto& p : grid.points()) pts.push_back(p.coords());
  return atoms(std::move(pts), std::move(weights));
}

int PhiMeasure::dim() const {
  return static_cast<int>(kind == Kind::Atoms ? points.front().size() : center.size());
}

SpherePoint PhiMeasure::sample(RngStream& rng) const {
  const int d = dim();
  if (kind == Kind::Atoms) {
    double c = rng.uniform();
    for (std::size_t k = 0; k + 1 < points.size(); ++k) {
      if (c < weights[k]) return SpherePoint::from_unit(points[k]);
      c -= weights[k];
    }
    return SpherePoint::from_unit(points.back());
  }
  const SpherePoint c = SpherePoint::from_unit(center);
  if (d == 1) return whole() && rng.bernoulli(0.5) ? -c : c;
  if (d == 2) {
    const double t0 = std::atan2(center(1), center(0));
    const double t = whole() ? 2.0 * std::numbers::pi * rng.uniform() : t0 + (2.0 * rng.uniform() - 1.0) * radius;
    RowVec y(2);
    y << std::cos(t), std::sin(t);
    return project(y);
  }
  // d = 3: uniform cap via z = cos(theta) uniform on [cos r, 1] around the center.
  const double z = 1.0 - rng.uniform() * (1.0 - std::cos(std::min(radius, std::numbers::pi)));
  const double az = 2.0 * std::numbers::pi * rng.uniform();
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Eigen::Vector3d n(center(0), center(1), center(2));
  const Eigen::Vector3d helper = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = n.cross(helper).normalized();
  const Eigen::Vector3d e2 = n.cross(e1);
  const Eigen::Vector3d y = z * n + s * std::cos(az) * e1 + s * std::sin(az) * e2;
  RowVec out(3);
  out << y.x(), y.y(), y.z();
  return project(out);
}

double PhiMeasure::value(const SpherePoint& y) const {
  if (kind == Kind::Atoms) {
    double mass = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k)
      if (angular_distance(SpherePoint::from_unit(points[k]), y) < kSame) mass += weights[k];
    return mass;
  }
  if (!whole() && angular_distance(SpherePoint::from_unit(center), y) > radius + 1e-12) return 0.0;
  return 1.0 / ball_area(dim(), radius);
}

// --- minorization --------------------------------------------------------------

bool MinorizationSpec::in_set(const SpherePoint& x) const {
  return whole_sphere || angular_distance(SpherePoint::from_unit(set_center), x) <= set_radius + 1e-12;
}

void MinorizationSpec::validate(int dim) const {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("minorization: p must lie in (0, 1]");
  if (phi.dim() != dim) throw ConfigError("minorization: phi has the wrong dimension");
  if (!whole_sphere) {
    if (set_center.size() != dim) throw ConfigError("minorization: set center has the wrong dimension");
    if (!(set_radius > 0.0)) throw ConfigError("minorization: set radius must be positive");
    // phi must live on the regeneration set.
    if (phi.kind == PhiMeasure::Kind::Atoms) {
      for (std::size_t k = 0; k < phi.points.size(); ++k)
        if (phi.weights[k] > 0.0 && !in_set(SpherePoint::from_unit(phi.points[k])))
          throw ConfigError("minorization: phi atom outside the regeneration set");
    } else {
      const double reach =
          angular_distance(SpherePoint::from_unit(set_center), SpherePoint::from_unit(phi.center)) + phi.radius;
      if (reach > set_radius + 1e-12) throw ConfigError("minorization: phi ball not contained in the regeneration set");
    }
  }
  if (residual_budget == 0) throw ConfigError("minorization: residual_budget must be positive");
}

// --- split chain ---------------------------------------------------------------

namespace {

struct Splitter {
  const DirectionKernel& kernel;
  const MinorizationSpec& minor;
  std::uint64_t proposals = 0;

  [[noreturn]] static void violated() {
    throw ConfigError("minorization violated: P(x, .) < p phi for some x in the regeneration set");
  }

  // Accept-reject against the kernel: accept a proposal with probability
  // p phi(y) / P(x, y) (phi branch) or 1 - p phi(y) / P(x, y) (residual branch).
  Step by_density(const SpherePoint& x, bool phi_branch, RngStream& rng) {
    for (std::size_t k = 0; k < minor.residual_budget; ++k) {
      ++proposals;
      const Step s = kernel.step(x, rng);
      const auto dens = kernel.density(x, s.x);
      const double a = minor.p * minor.phi.value(s.x) / *dens;
      if (a > 1.0 + 1e-9) violated();
      const double accept = phi_branch ? a : 1.0 - a;
      if (rng.uniform() < accept) return s;
    }
    throw NumericalError("split chain: accept-reject budget exhausted");
  }

  // Exact decomposition of an atomic law: the mass p phi({y}) is split over the
  // atoms landing on y in proportion to their probabilities.
  Step by_atoms(const SpherePoint& x, bool phi_branch, RngStream& rng) {
    const auto law = kernel.atoms(x);
    std::vector<double> at_y(law.size(), 0.0), phi_mass(law.size(), 0.0);
    for (std::size_t i = 0; i < law.size(); ++i) {
      for (const auto& b : law)
        if (angular_distance(law[i].y, b.y) < kSame) at_y[i] += b.prob;
      phi_mass[i] = minor.phi.value(law[i].y);
    }
    std::vector<double> w(law.size());
    double covered = 0.0, total = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      const double share = at_y[i] > 0.0 ? law[i].prob / at_y[i] : 0.0;
      const double phi_part = minor.p * phi_mass[i] * share;
      covered += phi_mass[i] * share;
      if (law[i].prob - phi_part < -1e-12) violated();
      w[i] = phi_branch ? phi_part : std::max(0.0, law[i].prob - phi_part);
      total += w[i];
    }
    if (covered < 1.0 - 1e-9) violated();  // part of phi is not reachable from x
    double c = rng.uniform() * total;
    for (std::size_t i = 0; i < law.size(); ++i) {
      if (c < w[i]) return {law[i].y, law[i].u, law[i].atom};
      c -= w[i];
    }
    for (std::size_t i = law.size(); i-- > 0;)
      if (w[i] > 0.0) return {law[i].y, law[i].u, law[i].atom};
    violated();
  }

  Step draw(const SpherePoint& x, bool phi_branch, RngStream& rng) {
    if (!kernel.atoms(x).empty()) return by_atoms(x, phi_branch, rng);
    if (kernel.density(x, x)) return by_density(x, phi_branch, rng);
    throw ConfigError("split chain: kernel has neither an atomic law nor a density");
  }
};

}  // namespace

RegenTrace run_split_chain(const DirectionKernel& kernel, const MinorizationSpec& minor, const SpherePoint& x0,
                           std::size_t n_steps, RngStream& rng, bool broken) {
  minor.validate(kernel.dim());
  if (x0.dim() != kernel.dim()) throw Error("split chain: start point has wrong dimension");
  Splitter split{kernel, minor};
  RegenTrace t;
  t.broken = broken;
  t.x.reserve(n_steps + 1);
  t.v.reserve(n_steps + 1);
  t.coin.reserve(n_steps);
  t.x.push_back(x0.coords());
  t.v.push_back(0.0);
  SpherePoint x = x0;
  for (std::size_t n = 0; n < n_steps; ++n) {
    signed char coin = -1;
    Step s;
    if (minor.in_set(x)) {
      coin = rng.bernoulli(minor.p) ? 1 : 0;
      s = broken ? kernel.step(x, rng) : split.draw(x, coin == 1, rng);
    } else {
      s = kernel.step(x, rng);
    }
    t.coin.push_back(coin);
    if (coin == 1) t.epochs.push_back(n + 1);
    x = s.x;
    t.x.push_back(x.coords());
    t.v.push_back(t.v.back() + s.u);
  }
  t.proposals = split.proposals;
  for (std::size_t k = 0; k + 1 < t.epochs.size(); ++k) {
    const std::size_t a = t.epochs[k], b = t.epochs[k + 1];
    t.cycles.push_back({a, b - a, t.v[b] - t.v[a], t.v[a] - t.v[a - 1]});
  }
  return t;
}

// --- diagnostics ---------------------------------------------------------------

RegenDiagnostics validate_regeneration(const RegenTrace& trace, const MinorizationSpec& minor, RngStream& rng,
                                       double alpha) {
  RegenDiagnostics d;
  d.n_cycles = trace.cycles.size();
  if (d.n_cycles < 200) throw Error("validate_regeneration: need at least 200 complete cycles");

  std::vector<double> lengths;
  for (const auto& c : trace.cycles) lengths.push_back(static_cast<double>(c.length));
  d.mean_cycle = stats::mean_se(lengths).mean;

  const std::size_t half = lengths.size() / 2;
  std::vector<double> first(lengths.begin(), lengths.begin() + half), second(lengths.begin() + half, lengths.end());
  d.ks_halves = stats::ks_statistic(first, second);
  d.ks_halves_critical = stats::ks_critical(first.size(), second.size(), alpha);
  d.ks_halves_p = stats::ks_pvalue(d.ks_halves, first.size(), second.size());

  const double n = static_cast<double>(lengths.size());
  d.lag1 = stats::lag1_autocorrelation(lengths);
  d.lag1_bound = 3.0 / std::sqrt(n);
  d.lag1_p = 2.0 * (1.0 - stats::normal_cdf(std::abs(d.lag1) * std::sqrt(n)));

  // X at regeneration epochs against fresh phi draws, coordinate by coordinate.
  const int dim = static_cast<int>(trace.x.front().size());
  const std::size_t m = trace.epochs.size();
  std::vector<RowVec> fresh(m);
  for (auto& f : fresh) f = minor.phi.sample(rng).coords();
  const double level = alpha / dim;
  d.ks_phi_critical = stats::ks_critical(m, m, level);
  d.ks_phi_p = 1.0;
  for (int i = 0; i < dim; ++i) {
    std::vector<double> a(m), b(m);
    for (std::size_t k = 0; k < m; ++k) {
      a[k] = trace.x[trace.epochs[k]](i);
      b[k] = fresh[k](i);
    }
    const double stat = stats::ks_statistic(a, b);
    if (stat >= d.ks_phi) d.ks_phi = stat;
    d.ks_phi_p = std::min(d.ks_phi_p, std::min(1.0, dim * stats::ks_pvalue(stat, m, m)));
  }

  // Times between successive visits to the regeneration set.
  std::vector<double> returns;
  std::size_t last = 0;
  bool seen = false;
  for (std::size_t k = 0; k < trace.coin.size(); ++k) {
    if (trace.coin[k] < 0) continue;
    if (seen) returns.push_back(static_cast<double>(k - last));
    last = k;
    seen = true;
  }
  if (!returns.empty()) {
    d.return_p_hat = 1.0 / stats::mean_se(returns).mean;
    if (d.return_p_hat < 1.0) d.return_fit = stats::chi_square_geometric(returns, d.return_p_hat);
  }
  return d;
}

stats::ChiSquareResult cycle_length_fit(const RegenTrace& trace, double p) {
  std::vector<double> lengths;
  for (const auto& c : trace.cycles) lengths.push_back(static_cast<double>(c.length));
  return stats::chi_square_geometric(lengths, p);
}

IncrementBounds regeneration_increment_bounds(const RegenTrace& trace) {
  if (trace.epochs.size() < 100) throw Error("regeneration_increment_bounds: need at least 100 epochs");
  IncrementBounds b;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t s : trace.epochs) {
    const double u = trace.v[s] - trace.v[s - 1];
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    b.running_low.push_back(lo);
    b.running_high.push_back(hi);
  }
  b.s_low = lo;
  b.s_high = hi;
  return b;
}

Occupation cycle_occupation(const RegenTrace& trace, const SphereGrid& bins) {
  if (trace.cycles.empty()) throw Error("cycle_occupation: no complete cycles");
  const std::size_t nb = bins.size();
  std::vector<std::vector<double>> occ(trace.cycles.size(), std::vector<double>(nb, 0.0));
  double total = 0.0;
  std::vector<double> sums(nb, 0.0);
  for (std::size_t c = 0; c < trace.cycles.size(); ++c) {
    const auto& cyc = trace.cycles[c];
    for (std::size_t k = cyc.start; k < cyc.start + cyc.length; ++k) {
      const std::size_t b = bins.bin(SpherePoint::from_unit(trace.x[k]));
      occ[c][b] += 0.5;
      occ[c][bins.antipode(b)] += 0.5;
    }
    total += static_cast<double>(cyc.length);
  }
  for (const auto& o : occ)
    for (std::size_t i = 0; i < nb; ++i) sums[i] += o[i];
  Occupation out;
  out.pi.resize(nb);
  out.se.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    out.pi[i] = sums[i] / total;
    double ss = 0.0;
    for (std::size_t c = 0; c < occ.size(); ++c) {
      const double r = occ[c][i] - out.pi[i] * static_cast<double>(trace.cycles[c].length);
      ss += r * r;
    }
    out.se[i] = std::sqrt(ss) / total;
  }
  return out;
}

// --- presets -------------------------------------------------------------------

double gaussian_doeblin_mass(const ModelSpec& spec) {
  if (spec.family != Family::GaussianPerturbed) throw Error("gaussian_doeblin: model is not gaussian_perturbed");
  const int d = spec.dimension;
  const auto sv = Eigen::JacobiSVD<Matrix>(spec.gamma0).singularValues();
  RowVec mean = RowVec::Zero(d);
  mean(0) = sv(0);
  RowVec y = RowVec::Zero(d);
  y(0) = -1.0;
  return sphere_area(d) * projected_normal_density(mean, spec.sigma, SpherePoint::from_unit(y));
}

MinorizationSpec gaussian_doeblin(const ModelSpec& spec, double safety) {
  if (!(safety > 0.0 && safety <= 1.0)) throw ConfigError("gaussian_doeblin: safety must lie in (0, 1]");
  MinorizationSpec m;
  m.whole_sphere = true;
  m.p = safety * gaussian_doeblin_mass(spec);
  m.phi = PhiMeasure::whole_sphere(spec.dimension);
  return m;
}

std::optional<MinorizationSpec> atomic_doeblin_1d(const DirectionKernel& kernel) {
  if (kernel.dim() != 1) throw Error("atomic_doeblin_1d: kernel must act on S^0");
  const SpherePoint plus = SpherePoint::from_unit(unit(1, 0)), minus = -plus;
  auto mass = [&](const SpherePoint& x, const SpherePoint& y) {
    double m = 0.0;
    for (const auto& a : kernel.atoms(x))
      if (angular_distance(a.y, y) < kSame) m += a.prob;
    return m;
  };
  const double to_plus = std::min(mass(plus, plus), mass(minus, plus));
  const double to_minus = std::min(mass(plus, minus), mass(minus, minus));
  const double p = to_plus + to_minus;
  if (!(p > 0.0)) return std::nullopt;
  MinorizationSpec m;
  m.whole_sphere = true;
  m.p = std::min(1.0, p);
  m.phi = PhiMeasure::atoms({plus.coords(), minus.coords()}, {to_plus / p, 1.0 - to_plus / p});
  return m;
}

// --- export --------------------------------------------------------------------

void write_regen_trace_csv(std::ostream& os, const RegenTrace& trace) {
  const auto d = trace.x.front().size();
  std::vector<char> epoch(trace.v.size(), 0);
  for (std::size_t s : trace.epochs) epoch[s] = 1;
  os << "n";
  for (Eigen::Index i = 0; i < d; ++i) os << ",x" << i;
  os << ",v,coin,epoch\n";
  for (std::size_t n = 0; n < trace.v.size(); ++n) {
    os << n;
    for (Eigen::Index i = 0; i < d; ++i) os << ',' << format_double(trace.x[n](i));
    os << ',' << format_double(trace.v[n]) << ',';
    if (n < trace.coin.size()) os << static_cast<int>(trace.coin[n]);
    os << ',' << static_cast<int>(epoch[n]) << '\n';
  }
}

}  // namespace kesten
