#pragma once

#include "kesten/model.hpp"
#include "kesten/rng.hpp"
#include "kesten/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

namespace kesten {

/// A point on the unit sphere S^{d-1}, stored as a row vector.
class SpherePoint {
 public:
  SpherePoint() = default;
  /// Wraps coordinates that are already unit length (checked to 1e-12).
  static SpherePoint from_unit(const RowVec& coords);

  const RowVec& coords() const noexcept { return coords_; }
  int dim() const noexcept { return static_cast<int>(coords_.size()); }
  double operator[](int i) const { return coords_(i); }
  SpherePoint operator-() const;

 private:
  explicit SpherePoint(const RowVec& c) : coords_(c) {}
  RowVec coords_;
  friend SpherePoint project(const RowVec& x);
};

/// x / |x|. Throws Error for the zero vector.
SpherePoint project(const RowVec& x);

/// Great-circle distance in radians.
double angular_distance(const SpherePoint& a, const SpherePoint& b);

/// Interpolation stencil: value = f[idx0] + w1 (f[idx1] - f[idx0]) + w2 (f[idx2] - f[idx0]).
/// Written relative to idx0 so constants are reproduced exactly.
struct Stencil {
  std::array<std::uint32_t, 3> idx{0, 0, 0};
  double w1 = 0.0;
  double w2 = 0.0;
};

/// Discretization of S^{d-1}, d <= 3, closed under x -> -x.
///   d = 1: the two points {-1, +1}
///   d = 2: uniform angular grid with an even number of angles
///   d = 3: icosphere obtained by repeated midpoint subdivision of the icosahedron
class SphereGrid {
 public:
  /// resolution: ignored for d = 1, number of angles for d = 2, subdivision level for d = 3.
  static SphereGrid make(int dim, int resolution);
  /// Default resolutions: 256 angles (d = 2), level 4 (d = 3).
  static SphereGrid make_default(int dim);

  int dim() const noexcept { return dim_; }
  int resolution() const noexcept { return resolution_; }
  std::size_t size() const noexcept { return points_.size(); }
  const SpherePoint& point(std::size_t i) const { return points_[i]; }
  const std::vector<SpherePoint>& points() const noexcept { return points_; }
  std::size_t antipode(std::size_t i) const { return antipode_[i]; }
  /// Quadrature weights of the uniform measure on S (sum to 1).
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// d = 1 exact lookup, d = 2 linear in angle, d = 3 barycentric in the containing triangle.
  Stencil stencil(const SpherePoint& x) const;
  /// Bin index of x: the grid point carrying the largest interpolation weight.
  std::size_t bin(const SpherePoint& x) const;
  double min_separation() const;

 private:
  struct Face {
    std::array<std::uint32_t, 3> v;
    std::int32_t first_child = -1;
  };

  void build_circle(int n);
  void build_icosphere(int level);
  void pair_antipodes();
  Stencil locate_icosphere(const RowVec& x) const;

  int dim_ = 1;
  int resolution_ = 0;
  std::vector<SpherePoint> points_;
  std::vector<std::size_t> antipode_;
  std::vector<double> weights_;
  // d = 3 only: face hierarchy and barycentric solvers of the finest faces.
  std::vector<std::vector<Face>> levels_;
  std::vector<Eigen::Matrix3d> leaf_inverse_;
};

/// One real value per grid point.
struct GridFunction {
  std::shared_ptr<const SphereGrid> grid;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(std::shared_ptr<const SphereGrid> g, double fill);
  GridFunction(std::shared_ptr<const SphereGrid> g, std::vector<double> v);

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  double sup_abs() const;
  double min() const;
  double max() const;
};

double evaluate(const Stencil& s, const std::vector<double>& values);
/// Evaluates f off-grid; exact at grid points and for constant f.
double interpolate(const GridFunction& f, const SpherePoint& x);

/// Exports rows "x0,...,x{d-1},value" with 17 significant digits.
void write_grid_function_csv(std::ostream& os, const GridFunction& f);
/// Reads a file written by write_grid_function_csv; coordinates must match `grid`.
GridFunction read_grid_function_csv(std::istream& is, std::shared_ptr<const SphereGrid> grid);

/// Tracks x Pi_n as (direction, log |x Pi_n|) without forming Pi_n.
struct ProductAccumulator {
  SpherePoint direction;
  double log_norm = 0.0;
  std::uint64_t steps = 0;

  explicit ProductAccumulator(const SpherePoint& start) : direction(start) {}
  /// Returns log |direction * m| and updates in place.
  double advance_inplace(const Matrix& m);
};

ProductAccumulator advance(ProductAccumulator acc, const Matrix& m);

struct LyapunovEstimate {
  double beta = 0.0;
  double std_error = 0.0;
  std::uint64_t n_steps = 0;
  std::uint64_t n_chains = 0;
};

/// beta = lim n^{-1} log |x Pi_n| averaged over independent chains started at e_1.
LyapunovEstimate lyapunov(const ModelSpec& spec, std::uint64_t n_steps, std::uint64_t n_chains, RngStream& rng,
                          int workers = 1);

/// Largest singular value.
double operator_norm(const Matrix& m);
/// Smallest eigenvalue of m m^T.
double lambda_min_mmt(const Matrix& m);

}  // namespace kesten
