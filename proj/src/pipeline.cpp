#include "kesten/pipeline.hpp"

#include "kesten/error.hpp"
#include "kesten/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace kesten {

namespace {

enum StageStream : std::uint64_t { kAudit = 1, kLyapunov, kKappa, kChain, kTail, kRegen, kSup };

constexpr double kKappaBand = 0.1;
constexpr double kFlaggedShare = 1e-3;

std::shared_ptr<const SphereGrid> make_grid(int dim, int resolution) {
  return std::make_shared<const SphereGrid>(resolution == 0 ? SphereGrid::make_default(dim)
                                                            : SphereGrid::make(dim, resolution));
}

std::shared_ptr<const SphereGrid> chain_bins(int dim, int resolution, std::shared_ptr<const SphereGrid> r_grid) {
  if (resolution != 0) return make_grid(dim, resolution);
  switch (dim) {
    case 2: return make_grid(2, 16);
    case 3: return make_grid(3, 1);
    default: return r_grid;
  }
}

SpherePoint e1(int dim) {
  RowVec x = RowVec::Zero(dim);
  x(0) = 1.0;
  return project(x);
}

std::string with_stamp(const Stamp& st, const std::string& csv) { return csv_stamp(st) + csv; }

template <class F>
std::string to_text(F&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace

struct Runner::KappaArtifacts {
  std::shared_ptr<const SphereGrid> grid;
  double kappa = 0.0;
  GridFunction r;
  std::string kappa_hash;
  std::string r_hash;
};

Runner::Runner(RunConfig cfg, std::uint64_t seed, int workers, std::filesystem::path out, std::ostream* log)
    : cfg_(std::move(cfg)), seed_(seed), workers_(std::max(1, workers)), out_(std::move(out)), log_(log) {
  std::error_code ec;
  std::filesystem::create_directories(out_, ec);
  if (ec || !std::filesystem::is_directory(out_))
    throw ConfigError("cannot create output directory '" + out_.string() + "'");
  cfg_.op.op.workers = workers_;
}

RngStream Runner::stream(std::uint64_t stage) const { return RngStream(seed_, stage); }

Stamp Runner::stamp(std::map<std::string, std::string> inputs) const {
  return Stamp{seed_, cfg_.hash, std::move(inputs)};
}

void Runner::emit(const std::string& name, const std::string& content) {
  write_file(out_ / name, content);
  if (current_ < stages_.size()) stages_[current_].files[name] = fnv1a_hex(content);
}

int Runner::guarded(const std::string& name, int (Runner::*fn)()) {
  const std::size_t outer = current_;
  current_ = stages_.size();
  stages_.push_back(StageRecord{name, kExitOk, "", {}});
  const std::size_t self = current_;
  if (log_) *log_ << "[" << name << "] start\n";
  int code = kExitOk;
  std::string message;
  try {
    code = (this->*fn)();
  } catch (const ConfigError& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const NumericalError& e) {
    code = kExitNumerical;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitNumerical;
    message = e.what();
  }
  stages_[self].code = code;
  if (!message.empty()) stages_[self].message = message;
  current_ = outer;
  if (log_) *log_ << "[" << name << "] " << (code == kExitOk ? "done" : "failed: " + stages_[self].message) << "\n";
  return code;
}

void Runner::write_manifest(int code) const {
  Json stages = Json::array();
  for (const auto& s : stages_) {
    Json files = Json::object();
    for (const auto& [k, v] : s.files) files[k] = v;
    stages.push_back({{"stage", s.name}, {"exit_code", s.code}, {"message", s.message}, {"files", files}});
  }
  Json checks = Json::array();
  for (const auto& c : checks_)
    checks.push_back({{"name", c.name}, {"value", std::isfinite(c.value) ? Json(c.value) : Json(nullptr)},
                      {"bound", c.bound}, {"pass", c.pass}});
  const char* verdict = code == kExitOk ? "pass" : code == kExitAcceptance ? "checks_failed" : "aborted";
  Json j = {{"stamp", to_json(stamp())},
            {"workers", workers_},
            {"exit_code", code},
            {"verdict", verdict},
            {"stages", stages},
            {"checks", checks}};
  write_file(out_ / "manifest.json", dump(j));
}

// --- stages ------------------------------------------------------------------------

int Runner::audit() {
  const int code = guarded("audit", &Runner::run_audit);
  write_manifest(code);
  return code;
}

int Runner::lyapunov() {
  const int code = guarded("lyapunov", &Runner::run_lyapunov);
  write_manifest(code);
  return code;
}

int Runner::kappa() {
  const int code = guarded("kappa", &Runner::run_kappa);
  write_manifest(code);
  return code;
}

int Runner::with_checks(int code) const {
  if (code != kExitOk) return code;
  const bool all = std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
  return all ? kExitOk : kExitAcceptance;
}

int Runner::tail() {
  const int code = with_checks(guarded("tail", &Runner::run_tail));
  write_manifest(code);
  return code;
}

int Runner::regen() {
  const int code = with_checks(guarded("regen", &Runner::run_regen));
  write_manifest(code);
  return code;
}

int Runner::pipeline() {
  int code = guarded("audit", &Runner::run_audit);
  if (code == kExitOk) code = guarded("lyapunov", &Runner::run_lyapunov);
  if (code == kExitOk && beta_ && !(*beta_ < 0.0)) {
    stages_.back().code = code = kExitAudit;
    stages_.back().message = "Lyapunov exponent is not negative; no stationary solution";
    if (log_) *log_ << "[lyapunov] " << stages_.back().message << "\n";
  }
  if (code == kExitOk) code = guarded("kappa", &Runner::run_kappa);
  if (code == kExitOk) code = guarded("tail", &Runner::run_tail);
  if (code == kExitOk && cfg_.regen.enabled) code = guarded("regen", &Runner::run_regen);
  code = with_checks(code);
  write_manifest(code);
  return code;
}

int Runner::run_audit() {
  RngStream rng = stream(kAudit);
  const AssumptionReport rep = audit_assumptions(cfg_.model, cfg_.audit.samples, rng);
  emit("audit.json", dump({{"stamp", to_json(stamp())}, {"audit", to_json(rep)}}));
  if (log_) {
    auto& os = *log_;
    os << std::left << std::setw(13) << "  id" << std::setw(15) << "estimate" << std::setw(12) << "std_error"
       << std::setw(10) << "relation" << std::setw(12) << "threshold" << "verdict\n";
    for (const auto& e : rep.entries) {
      os << "  " << std::setw(11) << e.id << std::setw(15) << e.estimate << std::setw(12) << e.std_error
         << std::setw(10) << e.relation << std::setw(12) << e.threshold << to_string(e.verdict) << "\n";
    }
    os << std::right;
  }
  if (!rep.hard_fail()) return kExitOk;
  std::string failed;
  for (const auto& e : rep.entries)
    if (e.verdict == Verdict::Fail) failed += (failed.empty() ? "" : ", ") + e.id;
  stages_[current_].message = "assumption checks failed: " + failed;
  return kExitAudit;
}

int Runner::run_lyapunov() {
  RngStream rng = stream(kLyapunov);
  const LyapunovEstimate est = kesten::lyapunov(cfg_.model, cfg_.lyapunov.steps, cfg_.lyapunov.chains, rng, workers_);
  beta_ = est.beta;
  emit("lyapunov.json", dump({{"stamp", to_json(stamp())}, {"lyapunov", to_json(est)}}));
  if (log_) *log_ << "  beta = " << est.beta << " +- " << est.std_error << "\n";
  return kExitOk;
}

int Runner::run_kappa() {
  RngStream rng = stream(kKappa);
  auto grid = make_grid(cfg_.model.dimension, cfg_.op.grid);
  KappaSolution sol;
  try {
    sol = solve_kappa(cfg_.model, grid, cfg_.op.op, rng);
  } catch (const BracketError& e) {
    Json curve = Json::array();
    for (const auto& [x, rho] : e.curve()) curve.push_back({x, rho});
    emit("kappa.json", dump({{"stamp", to_json(stamp())},
                             {"error", e.what()},
                             {"noise_dominated", e.noise_dominated()},
                             {"rho_curve", curve}}));
    std::string csv = "varkappa,rho\n";
    for (const auto& [x, rho] : e.curve()) csv += format_double(x) + "," + format_double(rho) + "\n";
    emit("rho_curve.csv", with_stamp(stamp(), csv));
    throw;
  }
  const std::string kappa_text = dump({{"stamp", to_json(stamp())}, {"kappa", to_json(sol, cfg_.op.op)}});
  const std::string r_text =
      with_stamp(stamp(), to_text([&](std::ostream& os) { write_grid_function_csv(os, sol.r); }));
  emit("kappa.json", kappa_text);
  emit("rho_curve.csv", with_stamp(stamp(), to_text([&](std::ostream& os) { write_rho_curve_csv(os, sol); })));
  emit("r.csv", r_text);
  kappa_ = std::make_shared<KappaArtifacts>(KappaArtifacts{grid, sol.kappa, sol.r, fnv1a_hex(kappa_text),
                                                           fnv1a_hex(r_text)});
  if (log_) *log_ << "  kappa = " << sol.kappa << " (rho = " << sol.rho_at_kappa << ")\n";
  return kExitOk;
}

const Runner::KappaArtifacts& Runner::need_kappa() {
  if (kappa_) return *kappa_;
  const auto kpath = out_ / "kappa.json";
  const auto rpath = out_ / "r.csv";
  if (std::filesystem::exists(kpath) && std::filesystem::exists(rpath)) {
    const std::string ktext = read_file(kpath);
    const Json j = Json::parse(ktext, nullptr, false);
    const bool matches = !j.is_discarded() && j.contains("kappa") && j.contains("stamp") &&
                         j["stamp"].value("seed", std::uint64_t{0}) == seed_ &&
                         j["stamp"].value("config_hash", std::string{}) == cfg_.hash;
    if (matches) {
      auto grid = make_grid(cfg_.model.dimension, cfg_.op.grid);
      const std::string rtext = read_file(rpath);
      std::istringstream is(rtext);
      GridFunction r = read_grid_function_csv(is, grid);
      if (r.size() == grid->size()) {
        kappa_ = std::make_shared<KappaArtifacts>(KappaArtifacts{
            grid, j["kappa"]["kappa"].get<double>(), std::move(r), fnv1a_hex(ktext), fnv1a_hex(rtext)});
        if (log_) *log_ << "  loaded kappa = " << kappa_->kappa << " from " << kpath.string() << "\n";
        return *kappa_;
      }
    }
  }
  if (guarded("kappa", &Runner::run_kappa) != kExitOk) throw NumericalError("kappa stage failed");
  return *kappa_;
}

int Runner::run_tail() {
  const KappaArtifacts& k = need_kappa();
  const Stamp st = stamp({{"kappa.json", k.kappa_hash}, {"r.csv", k.r_hash}});
  const ModelSpec& spec = cfg_.model;
  const int d = spec.dimension;

  RngStream rc = stream(kChain);
  ShiftedStepSampler sampler(spec, k.kappa, k.r, cfg_.chain.proposals, cfg_.chain.method);
  const auto bins = chain_bins(d, cfg_.chain.bins, k.grid);
  const StationaryEstimate pi =
      estimate_pi_alpha(sampler, k.grid->point(0), cfg_.chain.steps, cfg_.chain.burn_in, bins, rc);
  const DriftIntegral drift = drift_by_integral(sampler, pi, 1000, rc);
  emit("chain.json", dump({{"stamp", to_json(st)},
                           {"exact_tilt", sampler.exact()},
                           {"chain", to_json(pi)},
                           {"drift_integral", to_json(drift)}}));
  emit("pi.csv", with_stamp(st, to_text([&](std::ostream& os) { write_histogram_csv(os, pi); })));
  if (log_) *log_ << "  alpha = " << pi.alpha << " +- " << pi.alpha_se << "\n";

  RngStream rt = stream(kTail);
  RSampleConfig rcfg;
  rcfg.tol = cfg_.tail.tol;
  rcfg.max_depth = cfg_.tail.max_depth;
  rcfg.workers = workers_;
  const RSampleSet samples = sample_R(spec, cfg_.tail.samples, rcfg, rt);
  const std::size_t pairs = std::min(cfg_.tail.goldie_pairs, samples.samples.size());
  const GoldieResult goldie = goldie_constant(samples, spec, k.kappa, k.r, pi, pairs, rt);
  const auto dirs = default_directions(*k.grid, cfg_.tail.random_directions, rt);
  const TailReport rep = analyze_tail(samples, k.kappa, k.r, dirs, goldie, cfg_.tail.readout);
  emit("tail.json", dump({{"stamp", to_json(st)}, {"tail", to_json(rep)}}));
  emit("survival.csv", with_stamp(st, to_text([&](std::ostream& os) { write_survival_csv(os, rep); })));
  emit("hill.csv", with_stamp(st, to_text([&](std::ostream& os) { write_hill_csv(os, rep); })));
  if (log_) *log_ << "  K0 = " << goldie.k0 << " +- " << goldie.std_error << ", Hill |R| = " << rep.hill_modulus_kappa << "\n";

  if (cfg_.tail.sup_paths > 0) {
    RngStream rs = stream(kSup);
    SupTailConfig scfg;
    scfg.workers = workers_;
    const auto& ro = cfg_.tail.readout;
    const auto t = log_grid(ro.t_min.value_or(2.0), ro.t_max.value_or(500.0), ro.t_points);
    const SupTailResult sup = sup_tail(spec, k.kappa, e1(d), t, cfg_.tail.sup_paths, scfg, rs);
    emit("sup_tail.json", dump({{"stamp", to_json(st)}, {"sup_tail", to_json(sup)}}));
  }

  const double tol = cfg_.tail.readout.tolerance;
  checks_.push_back({"alpha_positive", pi.alpha, 0.0, pi.alpha > 0.0 && !pi.alpha_flagged});
  const double flagged_share =
      static_cast<double>(samples.flagged) / static_cast<double>(samples.flagged + samples.samples.size());
  checks_.push_back({"truncation_flagged_share", flagged_share, kFlaggedShare, flagged_share <= kFlaggedShare});
  checks_.push_back({"hill_modulus_vs_kappa", std::abs(rep.hill_modulus_kappa - k.kappa), kKappaBand,
                     std::abs(rep.hill_modulus_kappa - k.kappa) <= kKappaBand});
  for (std::size_t i = 0; i < rep.directions.size(); ++i) {
    const auto& dt = rep.directions[i];
    const std::string tag = "[" + std::to_string(i) + "]";
    const double ds = std::abs(dt.slope_kappa - k.kappa);
    checks_.push_back({"slope_vs_kappa" + tag, ds, kKappaBand, ds <= kKappaBand});
    checks_.push_back({"flatness" + tag, dt.flatness, tol, dt.flatness <= tol});
    const double rel = dt.level > 0.0 ? std::abs(dt.k_x - dt.level) / dt.level : INFINITY;
    checks_.push_back({"goldie_vs_level" + tag, rel, tol, rel <= tol});
    checks_.push_back({"K_lower_positive" + tag, dt.k_x_lo, 0.0, dt.k_x_lo > 0.0 && dt.level_lo > 0.0});
  }
  return kExitOk;
}

int Runner::run_regen() {
  const ModelSpec& spec = cfg_.model;
  const int d = spec.dimension;
  const auto& rc = cfg_.regen;
  std::unique_ptr<DirectionKernel> kernel;
  std::map<std::string, std::string> inputs;
  if (rc.kernel == RegenSection::Kernel::Shifted) {
    const KappaArtifacts& k = need_kappa();
    kernel = std::make_unique<ShiftedStepSampler>(spec, k.kappa, k.r, cfg_.chain.proposals, cfg_.chain.method);
    inputs = {{"kappa.json", k.kappa_hash}, {"r.csv", k.r_hash}};
  } else {
    kernel = std::make_unique<BaseKernel>(spec);
  }

  MinorizationSpec minor;
  if (rc.p) {
    minor.whole_sphere = !rc.set_center;
    if (rc.set_center) {
      minor.set_center = *rc.set_center;
      minor.set_radius = rc.set_radius;
    }
    minor.p = *rc.p;
    minor.phi = rc.phi_center ? PhiMeasure::uniform_ball(project(*rc.phi_center), rc.phi_radius)
                              : PhiMeasure::whole_sphere(d);
  } else if (spec.family == Family::GaussianPerturbed && rc.kernel == RegenSection::Kernel::Base) {
    minor = gaussian_doeblin(spec, rc.safety);
  } else if (auto a = d == 1 ? atomic_doeblin_1d(*kernel) : std::nullopt) {
    minor = *a;
  } else {
    throw ConfigError("no minorization preset for this model; set regeneration.p");
  }
  minor.validate(d);

  RngStream rng = stream(kRegen);
  const RegenTrace trace = run_split_chain(*kernel, minor, e1(d), rc.steps, rng);
  const RegenDiagnostics diag = validate_regeneration(trace, minor, rng, rc.alpha);
  const Stamp st = stamp(inputs);
  Json j = {{"stamp", to_json(st)}, {"minorization", to_json(minor)}, {"steps", rc.steps},
            {"epochs", trace.epochs.size()}, {"proposals", trace.proposals}, {"diagnostics", to_json(diag)}};
  checks_.push_back({"regen_halves", diag.ks_halves, diag.ks_halves_critical, diag.halves_ok()});
  checks_.push_back({"regen_independence", std::abs(diag.lag1), diag.lag1_bound, diag.independence_ok()});
  checks_.push_back({"regen_phi", diag.ks_phi, diag.ks_phi_critical, diag.phi_ok()});
  if (minor.whole_sphere && minor.p < 1.0) {
    const auto fit = cycle_length_fit(trace, minor.p);
    j["cycle_fit"] = {{"statistic", fit.statistic}, {"dof", fit.dof}, {"p_value", fit.p_value}};
    checks_.push_back({"regen_cycle_geometric", fit.p_value, rc.alpha, fit.p_value >= rc.alpha});
  }
  if (trace.epochs.size() >= 100) j["increment_bounds"] = to_json(regeneration_increment_bounds(trace));
  emit("regen.json", dump(j));
  emit("regen_trace.csv", with_stamp(st, to_text([&](std::ostream& os) { write_regen_trace_csv(os, trace); })));
  if (log_) *log_ << "  cycles = " << diag.n_cycles << ", mean length = " << diag.mean_cycle << "\n";
  return kExitOk;
}

}  // namespace kesten
