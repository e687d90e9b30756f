#include "kesten/config.hpp"
#include "kesten/error.hpp"
#include "kesten/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace {

struct Overrides {
  std::optional<int> grid;
  std::optional<std::size_t> samples;
  std::optional<double> tol;
  std::optional<double> tmin, tmax;
  std::optional<std::size_t> tpoints;
};

void apply(kesten::RunConfig& cfg, const std::string& cmd, const Overrides& o) {
  if (o.grid) cfg.op.grid = *o.grid;
  if (o.samples) {
    if (cmd == "audit") cfg.audit.samples = *o.samples;
    else if (cmd == "lyapunov") cfg.lyapunov.steps = *o.samples;
    else if (cmd == "kappa") cfg.op.op.n_mc = *o.samples;
    else if (cmd == "regen") cfg.regen.steps = *o.samples;
    else cfg.tail.samples = *o.samples;
  }
  if (o.tol) {
    if (cmd == "kappa") cfg.op.op.root_tol = *o.tol;
    else cfg.tail.tol = *o.tol;
  }
  if (o.tmin.has_value() != o.tmax.has_value()) throw kesten::ConfigError("--tmin and --tmax go together");
  if (o.tmin) {
    if (!(*o.tmin > 0.0 && *o.tmin < *o.tmax)) throw kesten::ConfigError("need 0 < --tmin < --tmax");
    cfg.tail.readout.t_min = *o.tmin;
    cfg.tail.readout.t_max = *o.tmax;
  }
  if (o.tpoints) {
    if (*o.tpoints < 2) throw kesten::ConfigError("--tpoints must be at least 2");
    cfg.tail.readout.t_points = *o.tpoints;
  }
  if (cmd == "regen") cfg.regen.enabled = true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tail index, eigenfunction and tail constant of R_n = M_n R_{n-1} + Q_n"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out = "out";
  Overrides o;
  app.add_option("--config", config, "model configuration (YAML)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "base random seed")->required();
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory");
  app.add_option("--grid", o.grid, "sphere grid resolution");
  app.add_option("--samples", o.samples, "primary sample count of the subcommand");
  app.add_option("--tol", o.tol, "kappa: root tolerance; tail: truncation tolerance");
  app.add_option("--tmin", o.tmin, "lower end of the survival grid");
  app.add_option("--tmax", o.tmax, "upper end of the survival grid");
  app.add_option("--tpoints", o.tpoints, "points of the survival grid");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"audit", "check the moment and non-degeneracy assumptions"},
      {"lyapunov", "estimate the top Lyapunov exponent"},
      {"kappa", "solve rho(kappa) = 1; writes kappa.json, rho_curve.csv, r.csv"},
      {"tail", "shifted chain, R samples, Goldie constant and tail readouts"},
      {"regen", "split chain and regeneration diagnostics"},
      {"pipeline", "all stages in order with a consolidated verdict"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kesten::kExitOk : kesten::kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    kesten::RunConfig cfg = kesten::load_config(config);
    apply(cfg, cmd, o);
    kesten::Runner runner(std::move(cfg), seed, workers, out, &std::cerr);
    int code = kesten::kExitOk;
    if (cmd == "audit") code = runner.audit();
    else if (cmd == "lyapunov") code = runner.lyapunov();
    else if (cmd == "kappa") code = runner.kappa();
    else if (cmd == "tail") code = runner.tail();
    else if (cmd == "regen") code = runner.regen();
    else code = runner.pipeline();
    for (const auto& c : runner.checks())
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " bound=" << c.bound << "\n";
    return code;
  } catch (const kesten::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kesten::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kesten::kExitNumerical;
  }
}
