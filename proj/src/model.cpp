#include "kesten/model.hpp"

#include "kesten/error.hpp"
#include "kesten/geometry.hpp"
#include "kesten/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace kesten {

std::string to_string(Family f) {
  switch (f) {
    case Family::ScalarTwoPoint: return "scalar_two_point";
    case Family::ScalarLognormal: return "scalar_lognormal";
    case Family::Similarity: return "similarity";
    case Family::GaussianPerturbed: return "gaussian_perturbed";
    case Family::Custom: return "custom";
  }
  return "unknown";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

namespace {

void check_weights(const std::vector<double>& w, const char* what) {
  if (w.empty()) throw ConfigError(std::string(what) + ": no weights");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw ConfigError(std::string(what) + ": weights must be nonnegative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError(std::string(what) + ": weights must sum to 1");
}

double condition_number(const Matrix& m) {
  const auto n = m.rows();
  if (n == 1) return std::abs(m(0, 0)) > 0.0 ? 1.0 : INFINITY;
  if (n == 2) {
    const double f = m.squaredNorm();
    const double det = std::abs(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0));
    if (!(det > 0.0)) return INFINITY;
    const double disc = std::sqrt(std::max(0.0, f * f - 4.0 * det * det));
    const double s1sq = 0.5 * (f + disc);
    const double s2sq = det * det / s1sq;
    return std::sqrt(s1sq / s2sq);
  }
  const auto sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? sv(0) / smin : INFINITY;
}

std::size_t pick(const std::vector<double>& weights, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return k;
  }
  return weights.size() - 1;
}

bool q_identically_zero(const QLaw& q) {
  if (q.kind == QLaw::Kind::Gaussian) return q.sd == 0.0 && q.mean.isZero(0.0);
  for (std::size_t k = 0; k < q.atoms.size(); ++k) {
    const bool live = q.kind == QLaw::Kind::Indexed || q.weights[k] > 0.0;
    if (live && !q.atoms[k].isZero(0.0)) return false;
  }
  return true;
}

}  // namespace

// --- validation --------------------------------------------------------------

void ModelSpec::validate() const {
  const int d = dimension;
  if (d < 1 || d > kMaxDim) throw ConfigError("dimension must be in 1..3");
  if (!(kappa0 > 0.0) || !std::isfinite(kappa0)) throw ConfigError("kappa0 must be positive");

  auto check_square = [d](const Matrix& m, const char* what) {
    if (m.rows() != d || m.cols() != d) throw ConfigError(std::string(what) + ": must be a d x d matrix");
    if (!m.allFinite()) throw ConfigError(std::string(what) + ": non-finite entry");
  };

  switch (family) {
    case Family::ScalarTwoPoint:
    case Family::Custom:
      if (family == Family::ScalarTwoPoint && (d != 1 || m_atoms.size() != 2))
        throw ConfigError("scalar_two_point needs dimension 1 and exactly two atoms");
      if (m_atoms.size() != m_weights.size()) throw ConfigError("M atoms and weights differ in length");
      check_weights(m_weights, "M weights");
      for (const auto& m : m_atoms) {
        check_square(m, "M atom");
        if (!std::isfinite(condition_number(m))) throw ConfigError("M atom is singular");
      }
      break;
    case Family::ScalarLognormal:
      if (d != 1) throw ConfigError("scalar_lognormal needs dimension 1");
      if (!(log_sd >= 0.0) || !std::isfinite(log_mean)) throw ConfigError("scalar_lognormal: invalid parameters");
      break;
    case Family::Similarity:
      if (scale.kind == ScaleLaw::Kind::Deterministic && !(scale.value > 0.0))
        throw ConfigError("similarity: scale must be positive");
      if (scale.kind == ScaleLaw::Kind::Lognormal && !(scale.log_sd >= 0.0))
        throw ConfigError("similarity: log_sd must be nonnegative");
      if (rotation.kind == RotationLaw::Kind::Fixed) {
        check_square(rotation.fixed, "rotation");
        const Matrix gram = rotation.fixed * rotation.fixed.transpose();
        if (!gram.isApprox(Matrix::Identity(d, d), 1e-10)) throw ConfigError("rotation matrix is not orthogonal");
      }
      break;
    case Family::GaussianPerturbed:
      check_square(gamma0, "gamma0");
      if (!std::isfinite(condition_number(gamma0))) throw ConfigError("gamma0 is singular");
      if (!(sigma > 0.0)) throw ConfigError("gaussian_perturbed: sigma must be positive");
      if (!(condition_cap > 1.0)) throw ConfigError("gaussian_perturbed: condition_cap must exceed 1");
      break;
  }

  switch (q.kind) {
    case QLaw::Kind::Atoms:
      if (q.atoms.size() != q.weights.size()) throw ConfigError("Q atoms and weights differ in length");
      check_weights(q.weights, "Q weights");
      break;
    case QLaw::Kind::Indexed:
      if (!tabulated()) throw ConfigError("indexed Q is only available for tabulated M");
      if (q.atoms.size() != m_atoms.size()) throw ConfigError("indexed Q needs one value per M atom");
      break;
    case QLaw::Kind::Gaussian:
      if (q.mean.size() != d) throw ConfigError("Q mean has wrong dimension");
      if (!(q.sd >= 0.0)) throw ConfigError("Q sd must be nonnegative");
      break;
  }
  for (const auto& a : q.atoms)
    if (a.size() != d || !a.allFinite()) throw ConfigError("Q atom has wrong dimension or non-finite entry");
}

// --- constructors ------------------------------------------------------------

namespace {
QLaw constant_q(int d, double value) {
  QLaw q;
  q.kind = QLaw::Kind::Atoms;
  q.atoms = {ColVec::Constant(d, value)};
  q.weights = {1.0};
  return q;
}
}  // namespace

ModelSpec scalar_two_point(double m1, double m2, double w1, double q, double kappa0) {
  ModelSpec s;
  s.name = "scalar_two_point";
  s.dimension = 1;
  s.family = Family::ScalarTwoPoint;
  s.kappa0 = kappa0;
  s.m_atoms = {Matrix::Constant(1, 1, m1), Matrix::Constant(1, 1, m2)};
  s.m_weights = {w1, 1.0 - w1};
  s.q = constant_q(1, q);
  s.validate();
  return s;
}

ModelSpec scalar_lognormal(double log_mean, double log_sd, double q, double kappa0) {
  ModelSpec s;
  s.name = "scalar_lognormal";
  s.dimension = 1;
  s.family = Family::ScalarLognormal;
  s.kappa0 = kappa0;
  s.log_mean = log_mean;
  s.log_sd = log_sd;
  s.q = constant_q(1, q);
  s.validate();
  return s;
}

ModelSpec similarity_lognormal(int dim, double log_mean, double log_sd, bool haar, double kappa0) {
  ModelSpec s;
  s.name = "similarity";
  s.dimension = dim;
  s.family = Family::Similarity;
  s.kappa0 = kappa0;
  s.scale.kind = ScaleLaw::Kind::Lognormal;
  s.scale.log_mean = log_mean;
  s.scale.log_sd = log_sd;
  s.rotation.kind = haar ? RotationLaw::Kind::Haar : RotationLaw::Kind::Fixed;
  s.rotation.fixed = Matrix::Identity(dim, dim);
  s.q = constant_q(dim, 0.0);
  s.q.atoms[0](0) = 1.0;
  s.validate();
  return s;
}

ModelSpec gaussian_perturbed(const Matrix& gamma0, double sigma, double kappa0) {
  ModelSpec s;
  s.name = "gaussian_perturbed";
  s.dimension = static_cast<int>(gamma0.rows());
  s.family = Family::GaussianPerturbed;
  s.kappa0 = kappa0;
  s.gamma0 = gamma0;
  s.sigma = sigma;
  s.q = constant_q(s.dimension, 0.0);
  s.q.atoms[0](0) = 1.0;
  s.validate();
  return s;
}

// --- sampling ----------------------------------------------------------------

Matrix haar_rotation(int dim, RngStream& rng) {
  Matrix o(dim, dim);
  if (dim == 1) {
    o(0, 0) = 1.0;
  } else if (dim == 2) {
    const double t = 2.0 * std::numbers::pi * rng.uniform();
    const double c = std::cos(t), s = std::sin(t);
    o << c, -s, s, c;
  } else {
    // Uniform unit quaternion -> uniform rotation.
    Eigen::Vector4d v;
    do {
      v << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    } while (v.norm() < 1e-12);
    v.normalize();
    const Eigen::Quaterniond qt(v(0), v(1), v(2), v(3));
    o = qt.toRotationMatrix();
  }
  return o;
}

Matrix sample_m(const ModelSpec& spec, RngStream& rng, SampleStats* stats, int* atom) {
  if (stats) ++stats->draws;
  switch (spec.family) {
    case Family::ScalarTwoPoint:
    case Family::Custom: {
      const std::size_t k = pick(spec.m_weights, rng.uniform());
      if (atom) *atom = static_cast<int>(k);
      return spec.m_atoms[k];
    }
    case Family::ScalarLognormal:
      return Matrix::Constant(1, 1, std::exp(spec.log_mean + spec.log_sd * rng.normal()));
    case Family::Similarity: {
      const double a = spec.scale.kind == ScaleLaw::Kind::Deterministic
                           ? spec.scale.value
                           : std::exp(spec.scale.log_mean + spec.scale.log_sd * rng.normal());
      if (spec.rotation.kind == RotationLaw::Kind::Fixed) return a * spec.rotation.fixed;
      return a * haar_rotation(spec.dimension, rng);
    }
    case Family::GaussianPerturbed: {
      const int d = spec.dimension;
      for (std::uint64_t attempt = 0; attempt <= spec.max_rejections; ++attempt) {
        Matrix m(d, d);
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < d; ++i) m(i, j) = spec.gamma0(i, j) + spec.sigma * rng.normal();
        if (condition_number(m) <= spec.condition_cap) return m;
        if (stats) ++stats->rejections;
      }
      throw NumericalError("gaussian_perturbed: rejection cap exceeded (sigma too large relative to gamma0)");
    }
  }
  throw Error("sample_m: unknown family");
}

PairSample sample_pair(const ModelSpec& spec, RngStream& rng, SampleStats* stats) {
  PairSample out;
  out.m = sample_m(spec, rng, stats, &out.atom);
  switch (spec.q.kind) {
    case QLaw::Kind::Atoms:
      out.q = spec.q.atoms.size() == 1 ? spec.q.atoms[0] : spec.q.atoms[pick(spec.q.weights, rng.uniform())];
      break;
    case QLaw::Kind::Indexed:
      out.q = spec.q.atoms[static_cast<std::size_t>(out.atom)];
      break;
    case QLaw::Kind::Gaussian:
      out.q = spec.q.mean;
      for (int i = 0; i < spec.dimension; ++i) out.q(i) += spec.q.sd * rng.normal();
      break;
  }
  return out;
}

StoppedPairSample sample_stopped_pair(const ModelSpec& spec, const StoppingRule& stopping, RngStream& rng,
                                      SampleStats* stats) {
  const int d = spec.dimension;
  StoppedPairSample out;
  if (stopping.kind == StoppingRule::Kind::Geometric) {
    if (!(stopping.p > 0.0 && stopping.p < 1.0)) throw Error("geometric stopping needs p in (0,1)");
    out.tau = rng.geometric(stopping.p);
  } else {
    if (stopping.n < 1) throw Error("fixed stopping needs n >= 1");
    out.tau = stopping.n;
  }
  out.pi_tau = Matrix::Identity(d, d);
  out.q_tau = ColVec::Zero(d);
  for (std::uint64_t k = 0; k < out.tau; ++k) {
    const PairSample p = sample_pair(spec, rng, stats);
    out.q_tau += out.pi_tau * p.q;
    out.pi_tau = out.pi_tau * p.m;
  }
  return out;
}

PairSample PairSource::draw(RngStream& rng, SampleStats* stats) const {
  if (!stopping) return sample_pair(*spec, rng, stats);
  StoppedPairSample s = sample_stopped_pair(*spec, *stopping, rng, stats);
  return PairSample{std::move(s.pi_tau), std::move(s.q_tau), -1};
}

// --- audit -------------------------------------------------------------------

std::optional<bool> degenerate_fixed_point(const ModelSpec& spec) {
  if (q_identically_zero(spec.q)) return true;  // v = 0 is a common fixed point
  if (spec.q.kind == QLaw::Kind::Gaussian) {
    if (spec.q.sd > 0.0) return false;  // P(Q = w) = 0 for every w
  }
  if (!spec.tabulated()) return std::nullopt;

  const int d = spec.dimension;
  std::vector<std::pair<std::size_t, ColVec>> rows;  // (M atom, Q value)
  for (std::size_t k = 0; k < spec.m_atoms.size(); ++k) {
    if (spec.m_weights[k] <= 0.0) continue;
    switch (spec.q.kind) {
      case QLaw::Kind::Indexed: rows.emplace_back(k, spec.q.atoms[k]); break;
      case QLaw::Kind::Gaussian: rows.emplace_back(k, spec.q.mean); break;
      case QLaw::Kind::Atoms:
        for (std::size_t j = 0; j < spec.q.atoms.size(); ++j)
          if (spec.q.weights[j] > 0.0) rows.emplace_back(k, spec.q.atoms[j]);
        break;
    }
  }
  // Stack (I - M_k) v = q for all live combinations and test solvability.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()) * d, d);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()) * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    a.block(static_cast<Eigen::Index>(r) * d, 0, d, d) =
        Eigen::MatrixXd::Identity(d, d) - Eigen::MatrixXd(spec.m_atoms[rows[r].first]);
    b.segment(static_cast<Eigen::Index>(r) * d, d) = Eigen::VectorXd(rows[r].second);
  }
  const Eigen::VectorXd v = a.completeOrthogonalDecomposition().solve(b);
  const double resid = (a * v - b).norm();
  return resid <= 1e-10 * (1.0 + b.norm());
}

bool AssumptionReport::hard_fail() const {
  return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.verdict == Verdict::Fail; });
}

const AssumptionEntry& AssumptionReport::entry(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return e;
  throw Error("no assumption entry " + id);
}

namespace {

Verdict compare_at_least(double est, double se, double thr) {
  const double eps = 1e-9 * std::max(1.0, std::abs(thr));
  if (!std::isfinite(est)) return Verdict::Indeterminate;
  if (est - 2.0 * se >= thr - eps) return Verdict::Pass;
  if (est + 2.0 * se < thr - eps) return Verdict::Fail;
  return Verdict::Indeterminate;
}

AssumptionEntry finite_entry(std::string id, std::string quantity, const stats::MeanSe& ms) {
  AssumptionEntry e{std::move(id), std::move(quantity), ms.mean, ms.se, 0.0, "finite", Verdict::Pass, ""};
  if (!std::isfinite(ms.mean) || !std::isfinite(ms.se)) e.verdict = Verdict::Fail;
  return e;
}

}  // namespace

AssumptionReport audit_assumptions(const ModelSpec& spec, std::size_t n_samples, RngStream& rng) {
  spec.validate();
  if (n_samples < 1000) throw Error("audit_assumptions: n_samples must be at least 1000");
  AssumptionReport rep;
  const double k0 = spec.kappa0;

  std::vector<double> log_m(n_samples), log_q(n_samples), inf_moment(n_samples), norm_moment(n_samples),
      q_moment(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const PairSample p = sample_pair(spec, rng, &rep.sampling);
    const double nm = operator_norm(p.m);
    const double nq = p.q.norm();
    log_m[i] = std::max(0.0, std::log(nm));
    log_q[i] = nq > 0.0 ? std::max(0.0, std::log(nq)) : 0.0;
    inf_moment[i] = std::pow(lambda_min_mmt(p.m), k0 / 2.0);
    norm_moment[i] = std::pow(nm, k0) * log_m[i];
    q_moment[i] = std::pow(nq, k0);
  }

  rep.entries.push_back(finite_entry("A1", "E log+ ||M||", stats::mean_se(log_m)));
  rep.entries.push_back(finite_entry("A2", "E log+ |Q|", stats::mean_se(log_q)));

  {
    AssumptionEntry e{"A6", "P(Mv + Q = v) < 1 for all v", 0.0, 0.0, 1.0, "exact", Verdict::Indeterminate, ""};
    const auto degenerate = degenerate_fixed_point(spec);
    if (!degenerate) {
      e.note = "indeterminate: holds generically for continuous laws";
    } else if (*degenerate) {
      e.verdict = Verdict::Fail;
      e.estimate = 1.0;
      e.note = "a common fixed point v solves M v + Q = v for every atom";
    } else {
      e.verdict = Verdict::Pass;
      e.note = "no common fixed point";
    }
    rep.entries.push_back(e);
  }

  {
    const auto ms = stats::mean_se(inf_moment);
    AssumptionEntry e{"A7.inf", "E lambda_min(MM^T)^(kappa0/2)", ms.mean, ms.se, 1.0, ">=", Verdict::Indeterminate,
                      ""};
    e.verdict = compare_at_least(ms.mean, ms.se, 1.0);
    rep.entries.push_back(e);
  }
  rep.entries.push_back(finite_entry("A7.moment", "E ||M||^kappa0 log+ ||M||", stats::mean_se(norm_moment)));
  {
    const auto ms = stats::mean_se(q_moment);
    AssumptionEntry e{"A7.q", "E |Q|^kappa0", ms.mean, ms.se, 0.0, ">", Verdict::Indeterminate, ""};
    if (!std::isfinite(ms.mean)) e.verdict = Verdict::Fail;
    else if (ms.mean - 2.0 * ms.se > 0.0) e.verdict = Verdict::Pass;
    else if (ms.mean + 2.0 * ms.se <= 0.0) e.verdict = Verdict::Fail;
    rep.entries.push_back(e);
  }

  {
    const auto ly = lyapunov(spec, std::max<std::uint64_t>(1000, n_samples / 4), 4, rng);
    rep.lyapunov_hint = ly.beta;
    rep.lyapunov_hint_se = ly.std_error;
    AssumptionEntry e{"beta", "Lyapunov exponent", ly.beta, ly.std_error, 0.0, "<", Verdict::Indeterminate, ""};
    if (ly.beta + 2.0 * ly.std_error < 0.0) e.verdict = Verdict::Pass;
    else if (ly.beta - 2.0 * ly.std_error >= 0.0) e.verdict = Verdict::Fail;
    rep.entries.push_back(e);
  }

  if (spec.family == Family::GaussianPerturbed) {
    const int d = spec.dimension;
    const auto sv = Eigen::JacobiSVD<Matrix>(spec.gamma0).singularValues();
    DensityBound b;
    b.center = spec.gamma0;
    b.radius = std::min(spec.sigma, 0.5 * sv(sv.size() - 1));
    // Gaussian density on R^{d^2} evaluated at Frobenius distance `radius`.
    b.gamma0 = std::pow(2.0 * std::numbers::pi * spec.sigma * spec.sigma, -0.5 * d * d) *
               std::exp(-b.radius * b.radius / (2.0 * spec.sigma * spec.sigma));
    rep.density_bound = b;
  }
  return rep;
}

}  // namespace kesten
