#include "doctest.h"

#include "kesten/error.hpp"
#include "kesten/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace kesten;

namespace {

RowVec row(std::initializer_list<double> xs) {
  RowVec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::shared_ptr<const SphereGrid> grid(int d, int res) { return std::make_shared<const SphereGrid>(SphereGrid::make(d, res)); }

}  // namespace

TEST_CASE("project") {
  const SpherePoint a = project(row({3.0, 4.0}));
  CHECK(a[0] == doctest::Approx(0.6));
  CHECK(a[1] == doctest::Approx(0.8));
  const SpherePoint e = project(row({1.0, 0.0, 0.0}));
  CHECK(e[0] == 1.0);
  const SpherePoint b = project(row({-2.0, 0.0}));
  CHECK(b[0] == -1.0);
  CHECK(b[1] == 0.0);
  CHECK_THROWS_AS(project(row({0.0, 0.0})), Error);
}

TEST_CASE("project is idempotent under positive scaling") {
  const RowVec x = row({0.3, -1.7, 2.2});
  const SpherePoint p = project(x);
  for (double t : {1e-8, 0.5, 3.0, 1e9}) {
    const SpherePoint q = project(p.coords() * t);
    CHECK((q.coords() - p.coords()).norm() < 1e-15);
    CHECK(std::abs(q.coords().norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("grids are antipodally closed with positive separation") {
  for (auto [d, res] : {std::pair{1, 2}, {2, 4}, {2, 256}, {3, 0}, {3, 2}, {3, 4}}) {
    const auto g = grid(d, res);
    for (std::size_t i = 0; i < g->size(); ++i) {
      const std::size_t j = g->antipode(i);
      CHECK((g->point(i).coords() + g->point(j).coords()).norm() == 0.0);
      CHECK(g->antipode(j) == i);
    }
    CHECK(g->min_separation() > 0.0);
    double wsum = 0.0;
    for (double w : g->weights()) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(SphereGrid::make_default(3).size() == 2562);
  CHECK(SphereGrid::make_default(2).size() == 256);
}

TEST_CASE("interpolation") {
  SUBCASE("constants are reproduced") {
    for (auto [d, res] : {std::pair{1, 2}, {2, 16}, {3, 2}}) {
      const auto g = grid(d, res);
      const GridFunction f(g, 2.5);
      RngStream rng(1);
      for (int i = 0; i < 100; ++i) {
        RowVec x(d);
        for (int k = 0; k < d; ++k) x(k) = rng.normal();
        CHECK(interpolate(f, project(x)) == 2.5);
      }
    }
  }
  SUBCASE("linear midpoint on the circle") {
    const auto g = grid(2, 4);
    std::vector<double> v(g->size(), 0.0);
    v[g->bin(project(row({0.0, 1.0})))] = 1.0;
    const GridFunction f(g, v);
    CHECK(interpolate(f, project(row({1.0, 1.0}))) == doctest::Approx(0.5));
  }
  SUBCASE("exact lookup in d = 1") {
    const auto g = grid(1, 2);
    std::vector<double> v(2);
    v[g->bin(project(row({-1.0})))] = 3.0;
    v[g->bin(project(row({1.0})))] = 7.0;
    const GridFunction f(g, v);
    CHECK(interpolate(f, project(row({1.0}))) == 7.0);
    CHECK(interpolate(f, project(row({-4.0}))) == 3.0);
  }
  SUBCASE("exact at grid points") {
    for (auto [d, res] : {std::pair{2, 32}, {3, 2}}) {
      const auto g = grid(d, res);
      std::vector<double> v(g->size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i));
      const GridFunction f(g, v);
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(interpolate(f, g->point(i)) == doctest::Approx(v[i]).epsilon(1e-12));
    }
  }
  SUBCASE("smooth functions converge with resolution on S^2") {
    auto err = [](int level) {
      const auto g = grid(3, level);
      std::vector<double> v(g->size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = g->point(i)[2] * g->point(i)[2];
      const GridFunction f(g, v);
      RngStream rng(2);
      double worst = 0.0;
      for (int i = 0; i < 2000; ++i) {
        const SpherePoint x = project(row({rng.normal(), rng.normal(), rng.normal()}));
        worst = std::max(worst, std::abs(interpolate(f, x) - x[2] * x[2]));
      }
      return worst;
    };
    CHECK(err(4) < err(2));
    CHECK(err(4) < 0.01);
  }
}

TEST_CASE("grid function CSV round trip is exact") {
  const auto g = grid(3, 2);
  std::vector<double> v(g->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + static_cast<double>(i) * std::numbers::pi);
  const GridFunction f(g, v);
  std::stringstream ss;
  write_grid_function_csv(ss, f);
  const GridFunction h = read_grid_function_csv(ss, g);
  REQUIRE(h.size() == f.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(h[i] == f[i]);
}

TEST_CASE("advance") {
  SUBCASE("dilation") {
    ProductAccumulator acc(project(row({1.0, 0.0})));
    acc = advance(acc, 2.0 * Matrix::Identity(2, 2));
    CHECK(acc.direction[0] == 1.0);
    CHECK(acc.log_norm == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("isometry") {
    RngStream rng(3);
    ProductAccumulator acc(project(row({0.0, 0.0, 1.0})));
    for (int i = 0; i < 10; ++i) acc = advance(acc, haar_rotation(3, rng));
    CHECK(std::abs(acc.log_norm) < 1e-14);
  }
  SUBCASE("cancellation in d = 1") {
    ProductAccumulator acc(project(row({1.0})));
    acc = advance(acc, Matrix::Constant(1, 1, 0.5));
    acc = advance(acc, Matrix::Constant(1, 1, 2.0));
    CHECK(acc.log_norm == 0.0);
    CHECK(acc.steps == 2);
  }
  SUBCASE("matches dense products") {
    Matrix g0(3, 3);
    g0 << 0.9, 0.2, 0.0, -0.1, 0.5, 0.3, 0.0, 0.1, 0.7;
    const ModelSpec s = gaussian_perturbed(g0, 0.4);
    RngStream rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const RowVec x = project(row({rng.normal(), rng.normal(), rng.normal()})).coords();
      ProductAccumulator acc(project(x));
      Matrix pi = Matrix::Identity(3, 3);
      for (int n = 0; n < 50; ++n) {
        const Matrix m = sample_m(s, rng);
        acc = advance(acc, m);
        pi = pi * m;
      }
      const double direct = (x * pi).norm();
      CHECK(std::abs(std::exp(acc.log_norm) / direct - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("Lyapunov exponent") {
  RngStream rng(5);
  const auto two = lyapunov(scalar_two_point(2.0, 0.5, 0.3), 20000, 8, rng);
  CHECK(std::abs(two.beta + 0.4 * std::log(2.0)) < 0.01);
  const auto sim = lyapunov(similarity_lognormal(2, -0.5, 1.0), 20000, 8, rng);
  CHECK(std::abs(sim.beta + 0.5) < 0.01);
  ModelSpec rot = similarity_lognormal(3, 0.0, 0.0);
  rot.scale.kind = ScaleLaw::Kind::Deterministic;
  rot.scale.value = 1.0;
  const auto iso = lyapunov(rot, 2000, 2, rng);
  CHECK(std::abs(iso.beta) < 1e-12);
  CHECK_THROWS(lyapunov(rot, 10, 2, rng));
}

TEST_CASE("Lyapunov estimate does not depend on the worker count") {
  RngStream a(6), b(6);
  const ModelSpec s = similarity_lognormal(3, -0.5, 1.0);
  const auto one = lyapunov(s, 2000, 6, a, 1);
  const auto four = lyapunov(s, 2000, 6, b, 4);
  CHECK(one.beta == four.beta);
  CHECK(one.std_error == four.std_error);
}
