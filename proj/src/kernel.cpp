#include "kesten/kernel.hpp"

#include "kesten/error.hpp"
#include "kesten/stats.hpp"

#include <cmath>
#include <numbers>

namespace kesten {

BaseKernel::BaseKernel(const ModelSpec& spec) : spec_(&spec) { spec.validate(); }

Step BaseKernel::step(const SpherePoint& x, RngStream& rng) const {
  Step s;
  const Matrix m = sample_m(*spec_, rng, nullptr, &s.atom);
  const RowVec y = x.coords() * m;
  const double n = y.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("kernel step: |xM| is zero or non-finite");
  s.x = project(y);
  s.u = std::log(n);
  return s;
}

std::vector<KernelAtom> BaseKernel::atoms(const SpherePoint& x) const {
  std::vector<KernelAtom> out;
  if (!spec_->tabulated()) return out;
  for (std::size_t k = 0; k < spec_->m_atoms.size(); ++k) {
    const RowVec y = x.coords() * spec_->m_atoms[k];
    out.push_back({project(y), std::log(y.norm()), spec_->m_weights[k], static_cast<int>(k)});
  }
  return out;
}

std::optional<double> BaseKernel::density(const SpherePoint& x, const SpherePoint& y) const {
  switch (spec_->family) {
    case Family::GaussianPerturbed:
      // x G has i.i.d. N(0, 1) entries for unit x; the condition cap is ignored here.
      return projected_normal_density(x.coords() * spec_->gamma0, spec_->sigma, y);
    case Family::Similarity:
      if (spec_->rotation.kind == RotationLaw::Kind::Haar && spec_->dimension > 1)
        return 1.0 / sphere_area(spec_->dimension);
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

double sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default: throw Error("sphere_area: dimension must be 1..3");
  }
}

double projected_normal_density(const RowVec& mean, double sigma, const SpherePoint& y) {
  const int d = y.dim();
  const double a = y.coords().dot(mean) / sigma;
  const double m2 = mean.squaredNorm() / (sigma * sigma);
  const double root2pi = std::sqrt(2.0 * std::numbers::pi);
  const double phi_big = stats::normal_cdf(a);
  const double e = std::exp(-0.5 * a * a);
  // I_k(a) = int_0^inf t^k exp(-(t - a)^2 / 2) dt.
  double ik = 0.0;
  switch (d) {
    case 1: ik = root2pi * phi_big; break;
    case 2: ik = e + a * root2pi * phi_big; break;
    case 3: ik = a * e + (1.0 + a * a) * root2pi * phi_big; break;
    default: throw Error("projected_normal_density: dimension must be 1..3");
  }
  return std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::exp(-0.5 * (m2 - a * a)) * ik;
}

}  // namespace kesten
