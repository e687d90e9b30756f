#pragma once

#include "kesten/geometry.hpp"
#include "kesten/model.hpp"
#include "kesten/rng.hpp"

#include <optional>
#include <vector>

namespace kesten {

/// One transition of the direction chain together with its norm increment.
struct Step {
  SpherePoint x;   ///< next direction (x M)~
  double u = 0.0;  ///< log |x M|
  int atom = -1;   ///< M atom used, tabulated families only
};

/// A point mass of an atomic transition law.
struct KernelAtom {
  SpherePoint y;
  double u = 0.0;
  double prob = 0.0;
  int atom = -1;
};

/// Markov kernel on S^{d-1} driving a Markov random walk (X_n, V_n).
class DirectionKernel {
 public:
  virtual ~DirectionKernel() = default;
  virtual int dim() const = 0;
  virtual Step step(const SpherePoint& x, RngStream& rng) const = 0;
  /// The full law of the next step when it is finitely supported, else empty.
  virtual std::vector<KernelAtom> atoms(const SpherePoint& /*x*/) const { return {}; }
  /// Density of the next direction with respect to surface measure on S^{d-1}
  /// (counting measure when d = 1); nullopt when not available in closed form.
  virtual std::optional<double> density(const SpherePoint& /*x*/, const SpherePoint& /*y*/) const {
    return std::nullopt;
  }
};

/// The untilted kernel x -> (x M)~.
class BaseKernel : public DirectionKernel {
 public:
  explicit BaseKernel(const ModelSpec& spec);
  explicit BaseKernel(ModelSpec&&) = delete;  // keeps a pointer to the spec
  int dim() const override { return spec_->dimension; }
  Step step(const SpherePoint& x, RngStream& rng) const override;
  std::vector<KernelAtom> atoms(const SpherePoint& x) const override;
  std::optional<double> density(const SpherePoint& x, const SpherePoint& y) const override;

 private:
  const ModelSpec* spec_;
};

/// Surface area of S^{d-1} (2 for d = 1: two points under counting measure).
double sphere_area(int dim);

/// Density of (m + sigma Z)~ at y for Z ~ N(0, I_d), with respect to surface measure.
double projected_normal_density(const RowVec& mean, double sigma, const SpherePoint& y);

}  // namespace kesten
