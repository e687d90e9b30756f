#include "doctest.h"

#include "kesten/kernel.hpp"
#include "kesten/regeneration.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace kesten;

namespace {

SpherePoint e1(int d) {
  RowVec x = RowVec::Zero(d);
  x(0) = 1.0;
  return project(x);
}

ModelSpec gaussian_model() {
  Matrix g0(2, 2);
  g0 << 0.8, 0.0, 0.0, 0.2;
  return gaussian_perturbed(g0, 1.0);
}

MinorizationSpec whole_sphere(int d, double p) {
  MinorizationSpec m;
  m.whole_sphere = true;
  m.p = p;
  m.phi = PhiMeasure::whole_sphere(d);
  return m;
}

}  // namespace

TEST_CASE("whole-sphere Doeblin mass matches a brute-force density minimum") {
  const ModelSpec s = gaussian_model();
  const SphereGrid g = SphereGrid::make(2, 720);
  Matrix g0(2, 2);
  g0 << 0.8, 0.0, 0.0, 0.2;
  double inf = INFINITY;
  for (const auto& x : g.points())
    for (const auto& y : g.points())
      inf = std::min(inf, projected_normal_density(x.coords() * g0, 1.0, y));
  const double brute = sphere_area(2) * inf;
  const double mass = gaussian_doeblin_mass(s);
  CHECK(mass == doctest::Approx(brute).epsilon(1e-3));
  CHECK(mass > 0.2);
  const MinorizationSpec m = gaussian_doeblin(s, 0.9);
  CHECK(m.p == doctest::Approx(0.9 * mass));
  CHECK(m.whole_sphere);
}

TEST_CASE("whole-sphere regeneration of the Gaussian base kernel") {
  const ModelSpec s = gaussian_model();
  const BaseKernel k(s);
  const MinorizationSpec m = whole_sphere(2, 0.2);
  RngStream rng(1);
  const RegenTrace tr = run_split_chain(k, m, e1(2), 50000, rng);
  REQUIRE(tr.cycles.size() >= 9000);
  const RegenDiagnostics d = validate_regeneration(tr, m, rng);
  CHECK(d.halves_ok());
  CHECK(d.independence_ok());
  CHECK(d.phi_ok());
  CHECK(d.mean_cycle == doctest::Approx(5.0).epsilon(0.05));
  const auto fit = cycle_length_fit(tr, 0.2);
  CHECK(fit.p_value > 0.01);
  for (std::size_t i = 0; i < tr.coin.size(); ++i) CHECK(tr.coin[i] != -1);
}

TEST_CASE("broken split chain fails the phi check") {
  const ModelSpec s = gaussian_model();
  const BaseKernel k(s);
  const MinorizationSpec m = whole_sphere(2, 0.2);
  RngStream rng(2);
  const RegenTrace tr = run_split_chain(k, m, e1(2), 50000, rng, true);
  CHECK(tr.broken);
  const RegenDiagnostics d = validate_regeneration(tr, m, rng);
  CHECK_FALSE(d.phi_ok());
}

TEST_CASE("p = 1 regenerates at every step") {
  // Haar similarity: P(x, .) is uniform for every x, so P = phi.
  const ModelSpec s = similarity_lognormal(2, -0.5, 1.0);
  const BaseKernel k(s);
  const MinorizationSpec m = whole_sphere(2, 1.0);
  RngStream rng(3);
  const RegenTrace tr = run_split_chain(k, m, e1(2), 1000, rng);
  REQUIRE(tr.epochs.size() >= 999);
  for (std::size_t i = 1; i < tr.epochs.size(); ++i) CHECK(tr.epochs[i] == tr.epochs[i - 1] + 1);
  for (const auto& c : tr.cycles) CHECK(c.length == 1);
}

TEST_CASE("small set in d = 1") {
  // M in {2, -1/2}: from either sign the next sign is + with probability 1/2,
  // so P(x, .) >= 1/2 delta_{+1} on the set {+1}.
  const ModelSpec s = scalar_two_point(2.0, -0.5, 0.5);
  const BaseKernel k(s);
  MinorizationSpec m;
  m.whole_sphere = false;
  m.set_center = e1(1).coords();
  m.set_radius = 0.1;
  m.p = 0.5;
  m.phi = PhiMeasure::atoms({e1(1).coords()}, {1.0});
  m.validate(1);
  RngStream rng(4);
  const RegenTrace tr = run_split_chain(k, m, e1(1), 20000, rng);
  REQUIRE(tr.epochs.size() > 1000);
  for (std::size_t e : tr.epochs) {
    REQUIRE(e >= 1);
    CHECK(tr.x[e - 1](0) == 1.0);
    CHECK(tr.x[e](0) == 1.0);
  }
  for (std::size_t i = 0; i < tr.coin.size(); ++i) CHECK((tr.coin[i] == -1) == (tr.x[i](0) < 0.0));
  // Epochs come from heads on visits to +1: rate 1/4 per step.
  const double rate = static_cast<double>(tr.epochs.size()) / 20000.0;
  CHECK(std::abs(rate - 0.25) < 4.0 * std::sqrt(0.25 * 0.75 / 20000.0));
}

TEST_CASE("regeneration increments stay within the support of log |M|") {
  const ModelSpec s = scalar_two_point(2.0, -0.5, 0.5);
  const BaseKernel k(s);
  const auto m = atomic_doeblin_1d(k);
  REQUIRE(m.has_value());
  CHECK(m->p == doctest::Approx(1.0));
  MinorizationSpec half = *m;
  half.p = 0.5;
  RngStream rng(5);
  const RegenTrace tr = run_split_chain(k, half, e1(1), 5000, rng);
  const IncrementBounds b = regeneration_increment_bounds(tr);
  CHECK(b.s_low >= -std::numbers::ln2 - 1e-12);
  CHECK(b.s_high <= std::numbers::ln2 + 1e-12);
  CHECK(b.s_low == doctest::Approx(-std::numbers::ln2));
  CHECK(b.s_high == doctest::Approx(std::numbers::ln2));
  for (std::size_t i = 1; i < b.running_high.size(); ++i) {
    CHECK(b.running_high[i] >= b.running_high[i - 1]);
    CHECK(b.running_low[i] <= b.running_low[i - 1]);
  }
}

TEST_CASE("atomic Doeblin data is absent without overlap") {
  // Positive scalars never change sign: P(+1, .) and P(-1, .) are disjoint.
  const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3);
  const BaseKernel k(s);
  CHECK_FALSE(atomic_doeblin_1d(k).has_value());
}

TEST_CASE("cycle occupation approximates the stationary law") {
  // Haar similarity: the base kernel moves to a uniform direction, so pi is uniform.
  const ModelSpec s = similarity_lognormal(2, -0.5, 1.0);
  const BaseKernel k(s);
  const MinorizationSpec m = whole_sphere(2, 0.5);
  RngStream rng(6);
  const RegenTrace tr = run_split_chain(k, m, e1(2), 40000, rng);
  const SphereGrid bins = SphereGrid::make(2, 8);
  const Occupation occ = cycle_occupation(tr, bins);
  double total = 0.0;
  for (std::size_t i = 0; i < occ.pi.size(); ++i) {
    total += occ.pi[i];
    CHECK(std::abs(occ.pi[i] - 0.125) <= 4.0 * occ.se[i]);
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("minorization validation") {
  MinorizationSpec m = whole_sphere(2, 0.0);
  CHECK_THROWS(m.validate(2));
  m.p = 1.5;
  CHECK_THROWS(m.validate(2));
  m.p = 0.5;
  CHECK_NOTHROW(m.validate(2));
  CHECK_THROWS(m.validate(3));
}

TEST_CASE("trace CSV") {
  const ModelSpec s = gaussian_model();
  const BaseKernel k(s);
  const MinorizationSpec m = whole_sphere(2, 0.2);
  RngStream rng(7);
  const RegenTrace tr = run_split_chain(k, m, e1(2), 100, rng);
  std::ostringstream os;
  write_regen_trace_csv(os, tr);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "n,x0,x1,v,coin,epoch");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 101);
}
