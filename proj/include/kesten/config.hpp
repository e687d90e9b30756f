#pragma once

#include "kesten/model.hpp"
#include "kesten/operator.hpp"
#include "kesten/regeneration.hpp"
#include "kesten/shifted_chain.hpp"
#include "kesten/tail.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace kesten {

struct LyapunovSection {
  std::uint64_t steps = 20000;
  std::uint64_t chains = 8;
};

struct AuditSection {
  std::size_t samples = 100000;
};

struct OperatorSection {
  int grid = 0;  ///< grid resolution, 0 for the default
  OperatorConfig op;
};

struct ChainSection {
  std::size_t steps = 200000;
  std::optional<std::size_t> burn_in;
  int bins = 0;  ///< resolution of the histogram grid, 0 for the default
  std::size_t proposals = 1024;
  ShiftedStepSampler::Method method = ShiftedStepSampler::Method::Auto;
};

struct TailSection {
  std::size_t samples = 1000000;
  double tol = 1e-12;
  std::size_t max_depth = 100000;
  std::size_t goldie_pairs = 200000;
  std::size_t random_directions = 8;
  std::size_t sup_paths = 0;  ///< 0 skips the sup_n |x Pi_n| tail
  TailConfig readout;
};

struct RegenSection {
  bool enabled = false;
  enum class Kernel { Base, Shifted };
  Kernel kernel = Kernel::Base;
  std::optional<double> p;  ///< preset value when absent
  double safety = 0.9;
  std::size_t steps = 100000;
  std::optional<RowVec> set_center;  ///< whole sphere when absent
  double set_radius = 0.0;
  std::optional<RowVec> phi_center;  ///< uniform on the sphere when absent
  double phi_radius = 0.0;
  double alpha = 0.01;
};

struct RunConfig {
  ModelSpec model;
  AuditSection audit;
  LyapunovSection lyapunov;
  OperatorSection op;
  ChainSection chain;
  TailSection tail;
  RegenSection regen;

  std::string source;  ///< raw configuration text
  std::string hash;    ///< digest of `source`
};

/// Parses a YAML configuration; errors carry the offending line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Family name as written in configuration files.
Family parse_family(const std::string& name);

}  // namespace kesten
