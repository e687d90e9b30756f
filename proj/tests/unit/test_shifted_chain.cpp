#include "doctest.h"

#include "kesten/shifted_chain.hpp"
#include "kesten/stats.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace kesten;

namespace {

std::shared_ptr<const SphereGrid> grid(int d, int res) { return std::make_shared<const SphereGrid>(SphereGrid::make(d, res)); }

SpherePoint e1(int d) {
  RowVec x = RowVec::Zero(d);
  x(0) = 1.0;
  return project(x);
}

const double kTwoPointKappa = std::log2(7.0 / 3.0);

}  // namespace

TEST_CASE("two-point tilt") {
  const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3);
  const ShiftedStepSampler sampler(s, kTwoPointKappa, GridFunction(grid(1, 2), 1.0));
  REQUIRE(sampler.exact());
  SUBCASE("atoms of the tilted law") {
    const auto atoms = sampler.atoms(e1(1));
    REQUIRE(atoms.size() == 2);
    for (const auto& a : atoms) CHECK(a.prob == doctest::Approx(a.atom == 0 ? 0.7 : 0.3).epsilon(1e-12));
  }
  SUBCASE("step frequencies") {
    RngStream rng(1);
    ShiftedChainTrace trace;
    const StationaryEstimate est = estimate_pi_alpha(sampler, e1(1), 100000, 0, nullptr, rng, &trace);
    double up = 0.0;
    for (int a : trace.atom) up += a == 0 ? 1.0 : 0.0;
    const double n = static_cast<double>(trace.atom.size());
    CHECK(std::abs(up / n - 0.7) <= 3.0 * std::sqrt(0.21 / n));
    CHECK(std::abs(est.alpha - 0.4 * std::numbers::ln2) <= 3.0 * est.alpha_se);
    CHECK(est.alpha_se < 5e-3);
    CHECK_FALSE(est.alpha_flagged);
    CHECK(est.pi[0] == doctest::Approx(0.5));
  }
  SUBCASE("drift by direct integration") {
    RngStream rng(2);
    const StationaryEstimate est = estimate_pi_alpha(sampler, e1(1), 20000, std::nullopt, nullptr, rng);
    const DriftIntegral d = drift_by_integral(sampler, est, 20000, rng);
    CHECK(std::abs(d.alpha - 0.4 * std::numbers::ln2) <= 3.0 * d.std_error + 1e-12);
  }
}

TEST_CASE("similarity tilt in d = 2") {
  const ModelSpec s = similarity_lognormal(2, -0.5, 1.0);
  const auto g = grid(2, 64);
  const ShiftedStepSampler sampler(s, 1.0, GridFunction(g, 1.0));
  REQUIRE(sampler.exact());
  RngStream rng(3);
  const auto bins = grid(2, 16);
  const StationaryEstimate est = estimate_pi_alpha(sampler, e1(2), 200000, std::nullopt, bins, rng);
  CHECK(std::abs(est.alpha - 0.5) <= 3.0 * est.alpha_se);
  CHECK(std::abs(est.alpha - 0.5) < 1e-2);
  for (std::size_t i = 0; i < est.pi.size(); ++i) CHECK(std::abs(est.pi[i] - 1.0 / 16.0) <= 3.0 * est.pi_se[i] + 1e-3);
}

TEST_CASE("resampling matches the exact tilt") {
  const ModelSpec s = similarity_lognormal(2, -0.5, 1.0);
  const auto g = grid(2, 64);
  RngStream rng(4);
  std::vector<double> err;
  for (std::size_t n_prop : {128u, 1024u}) {
    const ShiftedStepSampler sir(s, 1.0, GridFunction(g, 1.0), n_prop, ShiftedStepSampler::Method::Resample);
    REQUIRE_FALSE(sir.exact());
    const StationaryEstimate est = estimate_pi_alpha(sir, e1(2), 50000, std::nullopt, grid(2, 16), rng);
    CHECK(std::abs(est.alpha - 0.5) <= 4.0 * est.alpha_se + 0.03);
    err.push_back(std::abs(est.alpha - 0.5));
  }
  CHECK(err[1] < 0.03);
}

TEST_CASE("resampled two-point tilt frequencies") {
  const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3);
  const ShiftedStepSampler sir(s, kTwoPointKappa, GridFunction(grid(1, 2), 1.0), 1024,
                               ShiftedStepSampler::Method::Resample);
  RngStream rng(5);
  const ShiftedChainTrace trace = run_chain(sir, e1(1), 20000, 0, rng);
  double up = 0.0;
  for (std::size_t k = 1; k < trace.v.size(); ++k) up += trace.v[k] > trace.v[k - 1] ? 1.0 : 0.0;
  const double n = static_cast<double>(trace.steps());
  // Resampling from 1024 candidates tilts each step with O(1/n_prop) bias.
  CHECK(std::abs(up / n - 0.7) <= 3.0 * std::sqrt(0.21 / n) + 2e-3);
}

TEST_CASE("chain output is reproducible") {
  const ModelSpec s = similarity_lognormal(3, -0.5, 1.0);
  const ShiftedStepSampler sampler(s, 1.0, GridFunction(grid(3, 2), 1.0));
  RngStream a(6), b(6);
  const ShiftedChainTrace ta = run_chain(sampler, e1(3), 2000, 100, a);
  const ShiftedChainTrace tb = run_chain(sampler, e1(3), 2000, 100, b);
  CHECK(ta.v == tb.v);
  std::ostringstream oa, ob;
  write_trace_csv(oa, ta);
  write_trace_csv(ob, tb);
  CHECK(oa.str() == ob.str());
}

TEST_CASE("sampler validation") {
  const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3);
  CHECK_THROWS(ShiftedStepSampler(s, 0.0, GridFunction(grid(1, 2), 1.0)));
  CHECK_THROWS(ShiftedStepSampler(s, 1.0, GridFunction(grid(2, 4), 1.0)));
  CHECK_THROWS(ShiftedStepSampler(s, 1.0, GridFunction(grid(1, 2), 1.0), 10));
}

TEST_CASE("sup tail") {
  SUBCASE("deterministic contraction") {
    ModelSpec s = scalar_two_point(0.5, 0.5, 0.5);
    RngStream rng(7);
    const SupTailResult r = sup_tail(s, 1.0, e1(1), {0.25, 0.49, 0.51, 1.0}, 200, SupTailConfig{}, rng);
    CHECK(r.survival[0] == 1.0);
    CHECK(r.survival[1] == 1.0);
    CHECK(r.survival[2] == 0.0);
    CHECK(r.survival[3] == 0.0);
    CHECK(r.censored == 0);
  }
  SUBCASE("two-point walk hits 2^k with probability (3/7)^k") {
    const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3);
    RngStream rng(8);
    const std::vector<double> t = {1.5, 3.0, 6.0};
    const SupTailResult r = sup_tail(s, kTwoPointKappa, e1(1), t, 100000, SupTailConfig{}, rng);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double p = std::pow(3.0 / 7.0, static_cast<double>(i + 1));
      CHECK(r.lower[i] <= p);
      CHECK(r.upper[i] >= p);
      CHECK(r.scaled[i] == doctest::Approx(std::pow(t[i], kTwoPointKappa) * r.survival[i]));
    }
  }
}

TEST_CASE("histogram CSV has one row per bin") {
  const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3);
  const ShiftedStepSampler sampler(s, kTwoPointKappa, GridFunction(grid(1, 2), 1.0));
  RngStream rng(9);
  const StationaryEstimate est = estimate_pi_alpha(sampler, e1(1), 20000, std::nullopt, nullptr, rng);
  std::ostringstream os;
  write_histogram_csv(os, est);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);
}
