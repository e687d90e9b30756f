#pragma once

#include "kesten/config.hpp"
#include "kesten/report.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kesten {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitAudit = 2,
  kExitNumerical = 3,
  kExitAcceptance = 4,
};

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct StageRecord {
  std::string name;
  int code = kExitOk;
  std::string message;
  std::map<std::string, std::string> files;  ///< file name -> content digest
};

/// Runs pipeline stages against an output directory. Each stage draws from
/// its own stream derived from the seed, so a stage produces the same files
/// whether its inputs were computed in the same run or loaded from disk.
class Runner {
 public:
  Runner(RunConfig cfg, std::uint64_t seed, int workers, std::filesystem::path out, std::ostream* log = nullptr);

  int audit();
  int lyapunov();
  int kappa();
  /// Shifted chain, R samples and tail readouts; loads kappa artifacts when present.
  /// tail(), regen() and pipeline() return kExitAcceptance when a check fails.
  int tail();
  int regen();
  /// All stages in dependency order plus the consistency checks.
  int pipeline();

  const std::vector<StageRecord>& stages() const noexcept { return stages_; }
  const std::vector<Check>& checks() const noexcept { return checks_; }
  /// Writes manifest.json describing the stages run so far.
  void write_manifest(int code) const;

 private:
  struct KappaArtifacts;
  int guarded(const std::string& name, int (Runner::*fn)());
  /// kExitAcceptance when a stage succeeded but one of its checks failed.
  int with_checks(int code) const;
  int run_audit();
  int run_lyapunov();
  int run_kappa();
  int run_tail();
  int run_regen();
  const KappaArtifacts& need_kappa();
  void emit(const std::string& name, const std::string& content);
  Stamp stamp(std::map<std::string, std::string> inputs = {}) const;
  RngStream stream(std::uint64_t stage) const;

  RunConfig cfg_;
  std::uint64_t seed_;
  int workers_;
  std::filesystem::path out_;
  std::ostream* log_;
  std::vector<StageRecord> stages_;
  std::size_t current_ = static_cast<std::size_t>(-1);
  std::vector<Check> checks_;
  std::shared_ptr<KappaArtifacts> kappa_;
  std::optional<double> beta_;
  bool regen_ok_ = true;
  Json tail_summary_;
};

}  // namespace kesten
