#include "kesten/report.hpp"

#include <cmath>

namespace kesten {

namespace {

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json num_list(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

Json hill_list(const std::vector<HillPoint>& pts) {
  Json a = Json::array();
  for (const auto& p : pts)
    a.push_back({{"fraction", p.fraction}, {"k", p.k}, {"estimate", num(p.estimate)}, {"std_error", num(p.std_error)}});
  return a;
}

}  // namespace

Json to_json(const Stamp& s) {
  Json inputs = Json::object();
  for (const auto& [k, v] : s.inputs) inputs[k] = v;
  return {{"version", kVersion}, {"seed", s.seed}, {"config_hash", s.config_hash}, {"inputs", inputs}};
}

std::string csv_stamp(const Stamp& s) {
  std::string out = "# kesten " + std::string(kVersion) + " seed=" + std::to_string(s.seed) + " config=" + s.config_hash;
  for (const auto& [k, v] : s.inputs) out += " " + k + "=" + v;
  return out + "\n";
}

Json to_json(const RowVec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Json to_json(const AssumptionReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"id", e.id},
                       {"quantity", e.quantity},
                       {"estimate", num(e.estimate)},
                       {"std_error", num(e.std_error)},
                       {"relation", e.relation},
                       {"threshold", num(e.threshold)},
                       {"verdict", to_string(e.verdict)},
                       {"note", e.note}});
  }
  Json j = {{"entries", entries},
            {"lyapunov_hint", num(r.lyapunov_hint)},
            {"lyapunov_hint_se", num(r.lyapunov_hint_se)},
            {"draws", r.sampling.draws},
            {"rejections", r.sampling.rejections},
            {"hard_fail", r.hard_fail()}};
  if (r.density_bound) {
    Json center = Json::array();
    for (Eigen::Index i = 0; i < r.density_bound->center.rows(); ++i) center.push_back(to_json(RowVec(r.density_bound->center.row(i))));
    j["density_bound"] = {{"gamma0_matrix", center}, {"c", num(r.density_bound->radius)},
                          {"gamma0", num(r.density_bound->gamma0)}};
  }
  return j;
}

Json to_json(const LyapunovEstimate& e) {
  return {{"beta", num(e.beta)}, {"std_error", num(e.std_error)}, {"steps", e.n_steps}, {"chains", e.n_chains}};
}

Json to_json(const KappaSolution& k, const OperatorConfig& cfg) {
  Json curve = Json::array();
  for (const auto& [x, rho] : k.rho_curve) curve.push_back({num(x), num(rho)});
  return {{"kappa", num(k.kappa)},
          {"rho_at_kappa", num(k.rho_at_kappa)},
          {"root_tol", cfg.root_tol},
          {"mc_error", num(k.mc_error)},
          {"log_rho_slope", num(k.log_rho_slope)},
          {"fixed_point_residual", num(k.fixed_point_residual)},
          {"iterations", k.iterations},
          {"bisection_steps", k.bisection_steps},
          {"closed_form", k.closed_form},
          {"grid_resolution", k.r.grid ? k.r.grid->resolution() : 0},
          {"grid_size", k.r.size()},
          {"r_min", num(k.r.min())},
          {"r_max", num(k.r.sup_abs())},
          {"rho_curve", curve}};
}

Json to_json(const StationaryEstimate& e) {
  return {{"alpha", num(e.alpha)},
          {"alpha_se", num(e.alpha_se)},
          {"alpha_flagged", e.alpha_flagged},
          {"steps", e.n_steps},
          {"burn_in", e.burn_in},
          {"bins", e.pi.size()},
          {"pi", num_list(e.pi)},
          {"pi_se", num_list(e.pi_se)}};
}

Json to_json(const DriftIntegral& d) { return {{"alpha", num(d.alpha)}, {"std_error", num(d.std_error)}}; }

Json to_json(const GoldieResult& g) {
  return {{"k0", num(g.k0)}, {"std_error", num(g.std_error)}, {"se_mc", num(g.se_mc)}, {"se_pi", num(g.se_pi)},
          {"pairs", g.n_pairs}};
}

Json to_json(const TailReport& r) {
  Json dirs = Json::array();
  for (const auto& d : r.directions) {
    Json e = {{"x", to_json(d.x)},
              {"t_lo", num(d.t_lo)},
              {"t_hi", num(d.t_hi)},
              {"flatness", num(d.flatness)},
              {"level", num(d.level)},
              {"level_lo", num(d.level_lo)},
              {"slope_kappa", num(d.slope_kappa)},
              {"hill_kappa", d.hill_kappa ? num(*d.hill_kappa) : Json(nullptr)},
              {"symmetry_excess", num(d.symmetry_excess)},
              {"r", num(d.r_x)}};
    if (r.goldie) {
      e["K"] = num(d.k_x);
      e["K_lo"] = num(d.k_x_lo);
    }
    dirs.push_back(e);
  }
  Json unb = Json::array();
  for (const auto& u : r.unbounded.directions)
    unb.push_back({{"x", to_json(u.x)}, {"top_n", num(u.top_n)}, {"top_4n", num(u.top_4n)}, {"growing", u.growing}});
  Json j = {{"kappa", num(r.kappa)},
            {"samples", r.n_samples},
            {"flagged", r.flagged},
            {"mean_depth", num(r.mean_depth)},
            {"hill_modulus_kappa", num(r.hill_modulus_kappa)},
            {"hill_modulus", hill_list(r.hill_modulus)},
            {"directions", dirs},
            {"unbounded", {{"consistent", r.unbounded.consistent_with_unbounded}, {"directions", unb}}}};
  if (r.goldie) j["goldie"] = to_json(*r.goldie);
  return j;
}

Json to_json(const SupTailResult& s) {
  return {{"paths", s.n_paths}, {"censored", s.censored}, {"flatness", num(s.flatness)},
          {"t", num_list(s.t)},   {"survival", num_list(s.survival)}, {"lower", num_list(s.lower)},
          {"upper", num_list(s.upper)}, {"scaled", num_list(s.scaled)}};
}

Json to_json(const MinorizationSpec& m) {
  Json j = {{"whole_sphere", m.whole_sphere}, {"p", m.p}};
  if (!m.whole_sphere) {
    j["set_center"] = to_json(m.set_center);
    j["set_radius"] = m.set_radius;
  }
  if (m.phi.kind == PhiMeasure::Kind::UniformBall) {
    j["phi"] = {{"kind", "uniform_ball"}, {"center", to_json(m.phi.center)}, {"radius", num(m.phi.radius)}};
  } else {
    j["phi"] = {{"kind", "atoms"}, {"weights", num_list(m.phi.weights)}};
  }
  return j;
}

Json to_json(const RegenDiagnostics& d) {
  return {{"cycles", d.n_cycles},
          {"mean_cycle", num(d.mean_cycle)},
          {"ks_halves", num(d.ks_halves)},
          {"ks_halves_critical", num(d.ks_halves_critical)},
          {"ks_halves_p", num(d.ks_halves_p)},
          {"lag1", num(d.lag1)},
          {"lag1_bound", num(d.lag1_bound)},
          {"ks_phi", num(d.ks_phi)},
          {"ks_phi_critical", num(d.ks_phi_critical)},
          {"ks_phi_p", num(d.ks_phi_p)},
          {"return_p_hat", num(d.return_p_hat)},
          {"return_chi2", num(d.return_fit.statistic)},
          {"return_dof", num(d.return_fit.dof)},
          {"return_p", num(d.return_fit.p_value)},
          {"halves_ok", d.halves_ok()},
          {"independence_ok", d.independence_ok()},
          {"phi_ok", d.phi_ok()}};
}

Json to_json(const IncrementBounds& b) { return {{"s_low", num(b.s_low)}, {"s_high", num(b.s_high)}}; }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace kesten
