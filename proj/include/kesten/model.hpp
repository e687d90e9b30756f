#pragma once

#include "kesten/rng.hpp"
#include "kesten/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kesten {

/// Parametric families for the law of the i.i.d. pairs (M, Q) driving
/// R_n = M_n R_{n-1} + Q_n. Vectors x act on matrices from the left (x M);
/// Q and R are column vectors.
enum class Family {
  ScalarTwoPoint,     ///< d = 1, M takes two values
  ScalarLognormal,    ///< d = 1, log M ~ N(log_mean, log_sd^2)
  Similarity,         ///< M = A O, A > 0 scalar, O a rotation
  GaussianPerturbed,  ///< M = Gamma0 + sigma G, G with i.i.d. N(0,1) entries
  Custom,             ///< tabulated matrix atoms
};

std::string to_string(Family f);

struct ScaleLaw {
  enum class Kind { Deterministic, Lognormal };
  Kind kind = Kind::Deterministic;
  double value = 1.0;  // Deterministic
  double log_mean = 0.0;
  double log_sd = 0.0;
};

struct RotationLaw {
  enum class Kind { Fixed, Haar };
  Kind kind = Kind::Fixed;
  Matrix fixed;  // used when kind == Fixed
};

struct QLaw {
  enum class Kind {
    Atoms,     ///< independent of M, tabulated
    Gaussian,  ///< independent of M, mean + sd * N(0, I)
    Indexed,   ///< Q = atoms[k] when M takes its k-th atom (tabulated families only)
  };
  Kind kind = Kind::Atoms;
  std::vector<ColVec> atoms;
  std::vector<double> weights;  // Atoms only
  ColVec mean;
  double sd = 0.0;
};

struct ModelSpec {
  std::string name;
  int dimension = 1;
  Family family = Family::ScalarTwoPoint;
  double kappa0 = 1.0;

  // ScalarTwoPoint / Custom.
  std::vector<Matrix> m_atoms;
  std::vector<double> m_weights;

  // ScalarLognormal.
  double log_mean = 0.0;
  double log_sd = 0.0;

  // Similarity.
  ScaleLaw scale;
  RotationLaw rotation;

  // GaussianPerturbed.
  Matrix gamma0;
  double sigma = 0.0;
  double condition_cap = 1e6;
  std::uint64_t max_rejections = 10000;

  QLaw q;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  /// True when M has finitely many atoms (ScalarTwoPoint, Custom).
  bool tabulated() const { return family == Family::ScalarTwoPoint || family == Family::Custom; }
};

/// Convenience constructors used by tests, bindings and presets.
ModelSpec scalar_two_point(double m1, double m2, double w1, double q = 1.0, double kappa0 = 2.0);
ModelSpec scalar_lognormal(double log_mean, double log_sd, double q = 1.0, double kappa0 = 2.0);
ModelSpec similarity_lognormal(int dim, double log_mean, double log_sd, bool haar = true, double kappa0 = 2.0);
ModelSpec gaussian_perturbed(const Matrix& gamma0, double sigma, double kappa0 = 2.0);

struct PairSample {
  Matrix m;
  ColVec q;
  int atom = -1;  ///< index of the M atom for tabulated families
};

/// Counters updated by the samplers.
struct SampleStats {
  std::uint64_t draws = 0;
  std::uint64_t rejections = 0;
};

/// One draw from the law of (M, Q). GaussianPerturbed draws with condition
/// number above spec.condition_cap are rejected and counted; exceeding
/// spec.max_rejections consecutive rejections throws NumericalError.
PairSample sample_pair(const ModelSpec& spec, RngStream& rng, SampleStats* stats = nullptr);

/// Draw of M alone (Q is not generated).
Matrix sample_m(const ModelSpec& spec, RngStream& rng, SampleStats* stats = nullptr, int* atom = nullptr);

/// Random rotation matrix, Haar distributed on SO(d).
Matrix haar_rotation(int dim, RngStream& rng);

// --- assumption audit ------------------------------------------------------

enum class Verdict { Pass, Fail, Indeterminate };
std::string to_string(Verdict v);

struct AssumptionEntry {
  std::string id;        ///< "A1", "A2", "A6", "A7.inf", "A7.moment", "A7.q", "beta"
  std::string quantity;  ///< human readable description
  double estimate = 0.0;
  double std_error = 0.0;
  double threshold = 0.0;
  std::string relation;  ///< ">=", ">", "<", "finite", "exact"
  Verdict verdict = Verdict::Indeterminate;
  std::string note;
};

/// Density lower bound data of the form P(M in .) >= gamma0 1_{B_c(Gamma0)} Lebesgue.
struct DensityBound {
  Matrix center;
  double radius = 0.0;
  double gamma0 = 0.0;
};

struct AssumptionReport {
  std::vector<AssumptionEntry> entries;
  double lyapunov_hint = 0.0;
  double lyapunov_hint_se = 0.0;
  std::optional<DensityBound> density_bound;
  SampleStats sampling;

  bool hard_fail() const;
  const AssumptionEntry& entry(const std::string& id) const;
};

/// Monte Carlo audit of the moment and non-degeneracy assumptions.
AssumptionReport audit_assumptions(const ModelSpec& spec, std::size_t n_samples, RngStream& rng);

/// Exact check whether some v solves M v + Q = v for every atom pair of a
/// tabulated model with tabulated Q. Returns nullopt when not decidable.
std::optional<bool> degenerate_fixed_point(const ModelSpec& spec);

// --- stopped pairs -----------------------------------------------------------

struct StoppingRule {
  enum class Kind { Geometric, FixedN };
  Kind kind = Kind::Geometric;
  double p = 0.5;        ///< Geometric success probability, P(tau = n) = (1-p)^{n-1} p
  std::uint64_t n = 1;   ///< FixedN
  static StoppingRule geometric(double p) { return {Kind::Geometric, p, 1}; }
  static StoppingRule fixed(std::uint64_t n) { return {Kind::FixedN, 0.5, n}; }
};

struct StoppedPairSample {
  Matrix pi_tau;  ///< M_1 ... M_tau
  ColVec q_tau;   ///< sum_{k <= tau} M_1 ... M_{k-1} Q_k
  std::uint64_t tau = 1;
};

StoppedPairSample sample_stopped_pair(const ModelSpec& spec, const StoppingRule& stopping, RngStream& rng,
                                      SampleStats* stats = nullptr);

/// Source of pairs: either the base law or the stopped law (Pi_tau, Q^tau).
struct PairSource {
  const ModelSpec* spec = nullptr;
  std::optional<StoppingRule> stopping;

  PairSample draw(RngStream& rng, SampleStats* stats = nullptr) const;
};

}  // namespace kesten
