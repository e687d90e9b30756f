#include "doctest.h"

#include "kesten/geometry.hpp"
#include "kesten/operator.hpp"

#include <cmath>
#include <sstream>

using namespace kesten;

namespace {

std::shared_ptr<const SphereGrid> grid(int d, int res) { return std::make_shared<const SphereGrid>(SphereGrid::make(d, res)); }

double two_point_rho(double k) { return 0.3 * std::pow(2.0, k) + 0.7 * std::pow(2.0, -k); }

double lognormal_rho(double mu, double sd, double k) { return std::exp(mu * k + 0.5 * sd * sd * k * k); }

ModelSpec gaussian_model() {
  Matrix g0(2, 2);
  g0 << 0.8, 0.0, 0.0, 0.2;
  return gaussian_perturbed(g0, 0.6, 16.0);
}

}  // namespace

TEST_CASE("rho(0) = 1") {
  RngStream rng(1);
  OperatorConfig cfg;
  const ModelSpec g = gaussian_model();
  CHECK(spectral_radius(scalar_two_point(2.0, 0.5, 0.3), grid(1, 2), 0.0, cfg, rng).rho == doctest::Approx(1.0));
  CHECK(spectral_radius(similarity_lognormal(2, -0.5, 1.0), grid(2, 32), 0.0, cfg, rng).rho == doctest::Approx(1.0));
  CHECK(spectral_radius(g, grid(2, 32), 0.0, cfg, rng).rho == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("two-point model") {
  const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3);
  const auto g = grid(1, 2);
  OperatorConfig cfg;
  RngStream rng(2);
  SUBCASE("one application at varkappa = 1 multiplies constants by E M") {
    const GridFunction one(g, 1.0);
    const GridFunction t = apply_T(s, g, one, 1.0, cfg, rng);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == doctest::Approx(0.95).epsilon(1e-14));
  }
  SUBCASE("rho matches the moment generating function") {
    for (double k : {0.25, 0.5, 1.0, 1.5, 2.0})
      CHECK(spectral_radius(s, g, k, cfg, rng).rho == doctest::Approx(two_point_rho(k)).epsilon(1e-10));
  }
  SUBCASE("root") {
    const KappaSolution sol = solve_kappa(s, g, cfg, rng);
    CHECK(std::abs(sol.kappa - std::log2(7.0 / 3.0)) < 1e-6);
    CHECK(sol.closed_form);
    CHECK(sol.mc_error == 0.0);
    CHECK(std::abs(sol.rho_at_kappa - 1.0) < 1e-7);
    CHECK(sol.fixed_point_residual < 1e-8);
    for (std::size_t i = 0; i < sol.r.size(); ++i) CHECK(sol.r[i] == doctest::Approx(1.0));
  }
  SUBCASE("apply_T at the root fixes constants") {
    const GridFunction one(g, 1.0);
    const GridFunction t = apply_T(s, g, one, std::log2(7.0 / 3.0), cfg, rng);
    CHECK(t[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("lognormal families follow the closed form") {
  OperatorConfig cfg;
  RngStream rng(3);
  SUBCASE("scalar") {
    const ModelSpec s = scalar_lognormal(-0.25, std::sqrt(0.5));
    for (double k : {0.5, 1.0, 1.7})
      CHECK(spectral_radius(s, grid(1, 2), k, cfg, rng).rho ==
            doctest::Approx(lognormal_rho(-0.25, std::sqrt(0.5), k)).epsilon(1e-10));
    CHECK(solve_kappa(s, grid(1, 2), cfg, rng).kappa == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("similarity in d = 2 and 3") {
    for (int d : {2, 3}) {
      const ModelSpec s = similarity_lognormal(d, -0.5, 1.0);
      const auto g = d == 2 ? grid(2, 64) : grid(3, 2);
      const KappaSolution sol = solve_kappa(s, g, cfg, rng);
      CHECK(sol.kappa == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(sol.r.max() / sol.r.min() <= 1.005);
    }
  }
}

TEST_CASE("Monte Carlo operator is positive, monotone and homogeneous") {
  const ModelSpec s = gaussian_model();
  const auto g = grid(2, 32);
  OperatorConfig cfg;
  cfg.n_mc = 1000;
  RngStream rng(4);
  const TransferOperator op(s, g, cfg, rng);
  CHECK_FALSE(op.closed_form());
  std::vector<double> fv(g->size()), hv(g->size());
  for (std::size_t i = 0; i < fv.size(); ++i) {
    fv[i] = 1.0 + std::sin(3.0 * static_cast<double>(i));
    hv[i] = fv[i] + 0.5 + 0.1 * std::cos(static_cast<double>(i));
  }
  const GridFunction f(g, fv), h(g, hv);
  for (double k : {0.5, 2.0, 6.0}) {
    const auto b = op.bind(k);
    const GridFunction tf = op.apply(b, f);
    const GridFunction th = op.apply(b, h);
    std::vector<double> scaled(fv);
    for (auto& v : scaled) v *= 3.0;
    const GridFunction t3 = op.apply(b, GridFunction(g, scaled));
    for (std::size_t i = 0; i < fv.size(); ++i) {
      CHECK(tf[i] >= 0.0);
      CHECK(th[i] >= tf[i]);
      CHECK(t3[i] == doctest::Approx(3.0 * tf[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("log rho is convex in varkappa on a frozen sample") {
  const ModelSpec s = gaussian_model();
  const auto g = grid(2, 32);
  OperatorConfig cfg;
  cfg.n_mc = 1000;
  RngStream rng(5);
  const TransferOperator op(s, g, cfg, rng);
  std::vector<double> lr;
  for (int i = 0; i <= 8; ++i) lr.push_back(std::log(power_iteration(op, op.bind(0.5 * i)).rho));
  for (std::size_t i = 1; i + 1 < lr.size(); ++i) CHECK(lr[i] <= 0.5 * (lr[i - 1] + lr[i + 1]) + 1e-8);
}

TEST_CASE("eigenfunction is symmetric, positive and a fixed point") {
  const ModelSpec s = gaussian_model();
  const auto g = grid(2, 32);
  OperatorConfig cfg;
  cfg.n_mc = 2000;
  RngStream rng(6);
  const KappaSolution sol = solve_kappa(s, g, cfg, rng);
  CHECK(sol.kappa > 0.0);
  CHECK(sol.kappa < 16.0);
  CHECK(sol.r.min() > 0.0);
  CHECK(sol.r.sup_abs() == doctest::Approx(1.0));
  for (std::size_t i = 0; i < g->size(); ++i) CHECK(sol.r[i] == sol.r[g->antipode(i)]);
  CHECK(sol.fixed_point_residual < 1e-6);
  CHECK(sol.mc_error > 0.0);
  CHECK(sol.log_rho_slope > 0.0);
  for (std::size_t i = 1; i < sol.rho_curve.size(); ++i) CHECK(sol.rho_curve[i].first > sol.rho_curve[i - 1].first);
}

TEST_CASE("rho by dense products") {
  RngStream rng(7);
  SUBCASE("two-point, where the product estimator is unbiased") {
    const RhoByProducts r = validate_rho_by_products(scalar_two_point(2.0, 0.5, 0.3), 1.0, 5, 200000, rng);
    CHECK(std::abs(r.rho - 0.95) <= 3.0 * r.std_error + 1e-12);
  }
  SUBCASE("Gaussian: products agree with the operator") {
    const ModelSpec s = gaussian_model();
    OperatorConfig cfg;
    cfg.n_mc = 20000;
    const double op_rho = spectral_radius(s, grid(2, 32), 2.0, cfg, rng).rho;
    const RhoByProducts r = validate_rho_by_products(s, 2.0, 20, 20000, rng);
    CHECK(std::abs(r.rho / op_rho - 1.0) < 0.05);
  }
}

TEST_CASE("bracket failure carries the rho curve") {
  const ModelSpec s = scalar_two_point(2.0, 0.5, 0.3, 1.0, 1.0);  // rho(1) = 0.95 < 1
  OperatorConfig cfg;
  RngStream rng(8);
  try {
    solve_kappa(s, grid(1, 2), cfg, rng);
    FAIL("expected a bracket error");
  } catch (const BracketError& e) {
    REQUIRE_FALSE(e.curve().empty());
    CHECK(e.curve().back().first == doctest::Approx(1.0));
    CHECK(e.curve().back().second == doctest::Approx(0.95));
    CHECK_FALSE(e.noise_dominated());
  }
}

TEST_CASE("rho curve CSV") {
  OperatorConfig cfg;
  RngStream rng(9);
  const KappaSolution sol = solve_kappa(scalar_two_point(2.0, 0.5, 0.3), grid(1, 2), cfg, rng);
  std::ostringstream os;
  write_rho_curve_csv(os, sol);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "varkappa,rho");
  int rows = 0;
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    const double k = std::stod(line.substr(0, comma));
    const double rho = std::stod(line.substr(comma + 1));
    CHECK(rho == doctest::Approx(two_point_rho(k)).epsilon(1e-9));
    ++rows;
  }
  CHECK(rows == static_cast<int>(sol.rho_curve.size()));
}
