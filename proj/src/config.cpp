#include "kesten/config.hpp"

#include "kesten/error.hpp"
#include "kesten/io.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <set>

namespace kesten {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? -1 : n.Mark().line + 1; }

[[noreturn]] void fail(const YAML::Node& n, const std::string& what) { throw ConfigError(what, line_of(n)); }

void check_keys(const YAML::Node& n, const std::string& section, const std::set<std::string>& allowed) {
  if (!n.IsMap()) fail(n, "'" + section + "' must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in '" + section + "'");
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, "'" + key + "' has an invalid value '" + n.Scalar() + "'");
  }
}

template <class T>
void read(const YAML::Node& parent, const std::string& key, T& out) {
  if (const auto n = parent[key]) out = scalar<T>(n, key);
}

template <class T>
void read(const YAML::Node& parent, const std::string& key, std::optional<T>& out) {
  if (const auto n = parent[key]) out = scalar<T>(n, key);
}

std::vector<double> number_list(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) return {scalar<double>(n, key)};
  if (!n.IsSequence()) fail(n, "'" + key + "' must be a number or a list of numbers");
  std::vector<double> out;
  for (const auto& e : n) out.push_back(scalar<double>(e, key));
  return out;
}

RowVec row_vector(const YAML::Node& n, const std::string& key, int dim) {
  const auto v = number_list(n, key);
  if (static_cast<int>(v.size()) != dim) fail(n, "'" + key + "' must have " + std::to_string(dim) + " entries");
  RowVec out(dim);
  for (int i = 0; i < dim; ++i) out(i) = v[static_cast<std::size_t>(i)];
  return out;
}

/// A d x d matrix written as a list of rows; a bare number is accepted when d = 1.
Matrix matrix(const YAML::Node& n, const std::string& key, int dim) {
  Matrix m(dim, dim);
  if (n.IsScalar()) {
    if (dim != 1) fail(n, "'" + key + "' must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
    m(0, 0) = scalar<double>(n, key);
    return m;
  }
  if (!n.IsSequence() || static_cast<int>(n.size()) != dim)
    fail(n, "'" + key + "' must be a list of " + std::to_string(dim) + " rows");
  for (int i = 0; i < dim; ++i) {
    const auto row = row_vector(n[static_cast<std::size_t>(i)], key, dim);
    m.row(i) = row;
  }
  return m;
}

std::vector<double> weights(const YAML::Node& parent, const std::string& key, std::size_t expected) {
  const auto n = parent[key];
  if (!n) {
    if (expected == 1) return {1.0};
    fail(parent, "missing '" + key + "'");
  }
  auto w = number_list(n, key);
  if (w.size() != expected) fail(n, "'" + key + "' must have " + std::to_string(expected) + " entries");
  return w;
}

ColVec col_vector(const YAML::Node& n, const std::string& key, int dim) { return row_vector(n, key, dim).transpose(); }

YAML::Node require(const YAML::Node& parent, const std::string& key) {
  const auto n = parent[key];
  if (!n) fail(parent, "missing '" + key + "'");
  return n;
}

void parse_q(const YAML::Node& n, ModelSpec& spec) {
  check_keys(n, "q", {"law", "atoms", "weights", "values", "mean", "sd"});
  const auto law = scalar<std::string>(require(n, "law"), "law");
  const int d = spec.dimension;
  spec.q = QLaw{};
  if (law == "atoms" || law == "indexed") {
    const auto key = law == "atoms" ? "atoms" : "values";
    const auto list = require(n, key);
    if (!list.IsSequence() || list.size() == 0) fail(list, std::string("'") + key + "' must be a non-empty list");
    for (const auto& e : list) spec.q.atoms.push_back(col_vector(e, key, d));
    if (law == "atoms") {
      spec.q.kind = QLaw::Kind::Atoms;
      spec.q.weights = weights(n, "weights", spec.q.atoms.size());
    } else {
      spec.q.kind = QLaw::Kind::Indexed;
    }
  } else if (law == "gaussian") {
    spec.q.kind = QLaw::Kind::Gaussian;
    spec.q.mean = col_vector(require(n, "mean"), "mean", d);
    spec.q.sd = scalar<double>(require(n, "sd"), "sd");
  } else {
    fail(n["law"], "unknown q law '" + law + "' (atoms, gaussian, indexed)");
  }
}

ModelSpec parse_model(const YAML::Node& n) {
  check_keys(n, "model", {"name", "dimension", "family", "kappa0", "atoms", "weights", "log_mean", "log_sd", "scale",
                          "rotation", "gamma0", "sigma", "condition_cap", "max_rejections", "q"});
  ModelSpec spec;
  const auto fam_node = require(n, "family");
  try {
    spec.family = parse_family(scalar<std::string>(fam_node, "family"));
  } catch (const ConfigError& e) {
    fail(fam_node, e.what());
  }
  spec.name = to_string(spec.family);
  read(n, "name", spec.name);
  if (spec.family == Family::ScalarTwoPoint || spec.family == Family::ScalarLognormal) spec.dimension = 1;
  read(n, "dimension", spec.dimension);
  if (spec.dimension < 1 || spec.dimension > kMaxDim)
    fail(n["dimension"], "'dimension' must lie in [1, " + std::to_string(kMaxDim) + "]");
  read(n, "kappa0", spec.kappa0);
  const int d = spec.dimension;

  switch (spec.family) {
    case Family::ScalarTwoPoint:
    case Family::Custom: {
      const auto list = require(n, "atoms");
      if (!list.IsSequence() || list.size() == 0) fail(list, "'atoms' must be a non-empty list");
      for (const auto& e : list) spec.m_atoms.push_back(matrix(e, "atoms", d));
      if (spec.family == Family::ScalarTwoPoint && spec.m_atoms.size() != 2) fail(list, "'atoms' must have 2 entries");
      spec.m_weights = weights(n, "weights", spec.m_atoms.size());
      break;
    }
    case Family::ScalarLognormal:
      spec.log_mean = scalar<double>(require(n, "log_mean"), "log_mean");
      spec.log_sd = scalar<double>(require(n, "log_sd"), "log_sd");
      break;
    case Family::Similarity: {
      const auto sc = require(n, "scale");
      check_keys(sc, "scale", {"law", "value", "log_mean", "log_sd"});
      const auto law = scalar<std::string>(require(sc, "law"), "law");
      if (law == "fixed") {
        spec.scale.kind = ScaleLaw::Kind::Deterministic;
        spec.scale.value = scalar<double>(require(sc, "value"), "value");
      } else if (law == "lognormal") {
        spec.scale.kind = ScaleLaw::Kind::Lognormal;
        spec.scale.log_mean = scalar<double>(require(sc, "log_mean"), "log_mean");
        spec.scale.log_sd = scalar<double>(require(sc, "log_sd"), "log_sd");
      } else {
        fail(sc["law"], "unknown scale law '" + law + "' (fixed, lognormal)");
      }
      const auto rot = require(n, "rotation");
      check_keys(rot, "rotation", {"law", "angle", "matrix"});
      const auto rlaw = scalar<std::string>(require(rot, "law"), "law");
      if (rlaw == "haar") {
        spec.rotation.kind = RotationLaw::Kind::Haar;
        spec.rotation.fixed = Matrix::Identity(d, d);
      } else if (rlaw == "fixed") {
        spec.rotation.kind = RotationLaw::Kind::Fixed;
        if (rot["angle"]) {
          if (d != 2) fail(rot["angle"], "'angle' is only available in dimension 2");
          const double t = scalar<double>(rot["angle"], "angle");
          Matrix o(2, 2);
          o << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
          spec.rotation.fixed = o;
        } else if (rot["matrix"]) {
          spec.rotation.fixed = matrix(rot["matrix"], "matrix", d);
        } else {
          spec.rotation.fixed = Matrix::Identity(d, d);
        }
      } else {
        fail(rot["law"], "unknown rotation law '" + rlaw + "' (haar, fixed)");
      }
      break;
    }
    case Family::GaussianPerturbed:
      spec.gamma0 = matrix(require(n, "gamma0"), "gamma0", d);
      spec.sigma = scalar<double>(require(n, "sigma"), "sigma");
      read(n, "condition_cap", spec.condition_cap);
      read(n, "max_rejections", spec.max_rejections);
      break;
  }

  if (const auto q = n["q"]) {
    parse_q(q, spec);
  } else {
    spec.q.kind = QLaw::Kind::Atoms;
    ColVec e1 = ColVec::Zero(d);
    e1(0) = 1.0;
    spec.q.atoms = {e1};
    spec.q.weights = {1.0};
  }

  try {
    spec.validate();
  } catch (const ConfigError& e) {
    fail(n, e.what());
  }
  return spec;
}

void parse_operator(const YAML::Node& n, OperatorSection& s) {
  check_keys(n, "operator", {"grid", "n_mc", "common_random_numbers", "power_iter_tol", "power_iter_max", "root_tol",
                             "curve_points", "mc_error_sets", "force_monte_carlo"});
  read(n, "grid", s.grid);
  read(n, "n_mc", s.op.n_mc);
  read(n, "common_random_numbers", s.op.common_random_numbers);
  read(n, "power_iter_tol", s.op.power_iter_tol);
  read(n, "power_iter_max", s.op.power_iter_max);
  read(n, "root_tol", s.op.root_tol);
  read(n, "curve_points", s.op.curve_points);
  read(n, "mc_error_sets", s.op.mc_error_sets);
  read(n, "force_monte_carlo", s.op.force_monte_carlo);
  try {
    s.op.validate();
  } catch (const ConfigError& e) {
    fail(n, e.what());
  }
  if (s.grid < 0) fail(n["grid"], "'grid' must be nonnegative");
}

void parse_chain(const YAML::Node& n, ChainSection& s) {
  check_keys(n, "chain", {"steps", "burn_in", "bins", "proposals", "method"});
  read(n, "steps", s.steps);
  read(n, "burn_in", s.burn_in);
  read(n, "bins", s.bins);
  read(n, "proposals", s.proposals);
  if (const auto m = n["method"]) {
    const auto v = scalar<std::string>(m, "method");
    if (v == "auto") s.method = ShiftedStepSampler::Method::Auto;
    else if (v == "resample") s.method = ShiftedStepSampler::Method::Resample;
    else fail(m, "unknown chain method '" + v + "' (auto, resample)");
  }
  if (s.proposals < 2) fail(n["proposals"], "'proposals' must be at least 2");
}

void parse_tail(const YAML::Node& n, TailSection& s) {
  check_keys(n, "tail", {"samples", "tol", "max_depth", "goldie_pairs", "random_directions", "sup_paths", "q_lo", "q_hi",
                         "t_min", "t_max", "t_points", "hill_fraction", "k_fractions", "tolerance"});
  read(n, "samples", s.samples);
  read(n, "tol", s.tol);
  read(n, "max_depth", s.max_depth);
  read(n, "goldie_pairs", s.goldie_pairs);
  read(n, "random_directions", s.random_directions);
  read(n, "sup_paths", s.sup_paths);
  auto& r = s.readout;
  read(n, "q_lo", r.q_lo);
  read(n, "q_hi", r.q_hi);
  read(n, "t_min", r.t_min);
  read(n, "t_max", r.t_max);
  read(n, "t_points", r.t_points);
  read(n, "hill_fraction", r.hill_fraction);
  if (const auto k = n["k_fractions"]) r.k_fractions = number_list(k, "k_fractions");
  read(n, "tolerance", r.tolerance);
  if (!(s.tol > 0.0)) fail(n["tol"], "'tol' must be positive");
  if (!(r.q_lo > 0.0 && r.q_lo < r.q_hi && r.q_hi < 1.0)) fail(n, "need 0 < q_lo < q_hi < 1");
  if (r.t_min.has_value() != r.t_max.has_value()) fail(n, "'t_min' and 't_max' go together");
  if (r.t_min && !(*r.t_min > 0.0 && *r.t_min < *r.t_max)) fail(n["t_min"], "need 0 < t_min < t_max");
  if (r.t_points < 2) fail(n["t_points"], "'t_points' must be at least 2");
}

void parse_regen(const YAML::Node& n, RegenSection& s, int dim) {
  check_keys(n, "regeneration",
             {"enabled", "kernel", "p", "safety", "steps", "set_center", "set_radius", "phi_center", "phi_radius", "alpha"});
  s.enabled = true;
  read(n, "enabled", s.enabled);
  if (const auto k = n["kernel"]) {
    const auto v = scalar<std::string>(k, "kernel");
    if (v == "base") s.kernel = RegenSection::Kernel::Base;
    else if (v == "shifted") s.kernel = RegenSection::Kernel::Shifted;
    else fail(k, "unknown kernel '" + v + "' (base, shifted)");
  }
  read(n, "p", s.p);
  read(n, "safety", s.safety);
  read(n, "steps", s.steps);
  if (const auto c = n["set_center"]) s.set_center = row_vector(c, "set_center", dim);
  read(n, "set_radius", s.set_radius);
  if (const auto c = n["phi_center"]) s.phi_center = row_vector(c, "phi_center", dim);
  read(n, "phi_radius", s.phi_radius);
  read(n, "alpha", s.alpha);
  if (s.p && !(*s.p > 0.0 && *s.p <= 1.0)) fail(n["p"], "'p' must lie in (0, 1]");
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) fail(n["alpha"], "'alpha' must lie in (0, 1)");
}

}  // namespace

Family parse_family(const std::string& name) {
  for (Family f : {Family::ScalarTwoPoint, Family::ScalarLognormal, Family::Similarity, Family::GaussianPerturbed,
                   Family::Custom})
    if (to_string(f) == name) return f;
  throw ConfigError("unknown family '" + name +
                    "' (scalar_two_point, scalar_lognormal, similarity, gaussian_perturbed, custom)");
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a mapping", 1);
  check_keys(root, "top level", {"model", "audit", "lyapunov", "operator", "chain", "tail", "regeneration"});

  RunConfig cfg;
  cfg.model = parse_model(require(root, "model"));
  if (const auto a = root["audit"]) {
    check_keys(a, "audit", {"samples"});
    read(a, "samples", cfg.audit.samples);
    if (cfg.audit.samples < 1000) fail(a["samples"], "'samples' must be at least 1000");
  }
  if (const auto l = root["lyapunov"]) {
    check_keys(l, "lyapunov", {"steps", "chains"});
    read(l, "steps", cfg.lyapunov.steps);
    read(l, "chains", cfg.lyapunov.chains);
    if (cfg.lyapunov.steps < 1000) fail(l["steps"], "'steps' must be at least 1000");
    if (cfg.lyapunov.chains < 1) fail(l["chains"], "'chains' must be positive");
  }
  if (const auto o = root["operator"]) parse_operator(o, cfg.op);
  if (const auto c = root["chain"]) parse_chain(c, cfg.chain);
  if (const auto t = root["tail"]) parse_tail(t, cfg.tail);
  if (const auto r = root["regeneration"]) parse_regen(r, cfg.regen, cfg.model.dimension);
  cfg.source = text;
  cfg.hash = fnv1a_hex(text);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

}  // namespace kesten
